#pragma once

// Coupled water/air pressure-head solver on a 2D vertical cross-section of the
// soil column. Cell-centred finite volumes, two-point fluxes with harmonic-mean
// intrinsic permeability and upstream relative permeability, backward Euler in
// time with a mass-conservative Picard linearisation.
//
// Grid convention: i indexes x (0..nx-1), j indexes y (0 at the bottom outlet,
// ny-1 at the air inlet). Unknowns are interleaved per cell: 2c -> h_w,
// 2c+1 -> h_nw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "unsatnet/constitutive.hpp"
#include "unsatnet/error.hpp"
#include "unsatnet/grid.hpp"
#include "unsatnet/hetfield.hpp"

namespace unsatnet {

struct GridGeometry {
  std::size_t nx = 64;
  std::size_t ny = 64;
  double width = 12.0;           // cm, column diameter
  double column_height = 8.34;   // cm
  double disk_thickness = 0.74;  // cm

  double dx() const noexcept { return width / static_cast<double>(nx); }
  double dy() const noexcept { return column_height / static_cast<double>(ny); }
  double x_center(std::size_t i) const noexcept {
    return (static_cast<double>(i) + 0.5) * dx();
  }
  double y_center(std::size_t j) const noexcept {
    return (static_cast<double>(j) + 0.5) * dy();
  }
  /// The air-impermeable disk occupies rows whose centre lies below its top.
  bool is_disk_row(std::size_t j) const noexcept {
    return y_center(j) < disk_thickness;
  }
  std::size_t disk_rows() const noexcept {
    std::size_t r = 0;
    while (r < ny && is_disk_row(r)) ++r;
    return r;
  }

  void validate() const {
    if (nx < 1 || ny < 2) throw ValidationError("geometry", "need nx >= 1, ny >= 2");
    if (!(width > 0)) throw ValidationError("width", "must be > 0");
    if (!(column_height > 0)) throw ValidationError("column_height", "must be > 0");
    if (!(disk_thickness >= 0 && disk_thickness < column_height))
      throw ValidationError("disk_thickness", "must lie in [0, column_height)");
  }
};

/// Soil constants shared by every cell.
struct SoilProps {
  double theta_r = 0.0210;
  double alpha = 0.0189;  // 1/cm
  double eta = 0.5;
  double disk_permeability = 1.0e-9;  // cm^2

  void validate() const {
    if (!(theta_r >= 0 && theta_r < 1)) throw ValidationError("theta_r", "must be in [0, 1)");
    if (!(alpha > 0)) throw ValidationError("alpha", "must be > 0");
    if (!(eta >= 0)) throw ValidationError("eta", "must be >= 0");
    if (!(disk_permeability > 0)) throw ValidationError("disk_permeability", "must be > 0");
  }
};

enum class ScheduleKind { kRamp, kSteps };

/// Inlet air head and outlet water head as functions of time.
struct BoundarySchedule {
  ScheduleKind kind = ScheduleKind::kRamp;
  double t_end = 1.0;           // h
  double inlet_start = 20.0;    // cm
  double inlet_end = 30.0;      // cm
  double outlet_start = 0.0;    // cm
  double outlet_end = 10.0;     // cm
  int inlet_steps = 5;          // only for kSteps

  double inlet_air_head(double t) const {
    const double f = fraction(t);
    if (kind == ScheduleKind::kSteps) {
      const double stair = std::floor(f * inlet_steps + 1e-12) / inlet_steps;
      return inlet_start + (inlet_end - inlet_start) * std::min(stair, 1.0);
    }
    return inlet_start + (inlet_end - inlet_start) * f;
  }

  double outlet_water_head(double t) const {
    return outlet_start + (outlet_end - outlet_start) * fraction(t);
  }

  void validate() const {
    if (!(t_end >= 0)) throw ValidationError("t_end", "must be >= 0");
    if (kind == ScheduleKind::kSteps && inlet_steps < 1)
      throw ValidationError("inlet_steps", "must be >= 1");
  }

 private:
  double fraction(double t) const {
    if (t_end <= 0.0) return 0.0;
    return std::clamp(t / t_end, 0.0, 1.0);
  }
};

struct SolverOptions {
  double picard_tol = 1e-6;
  int max_picard = 50;
  double dt_initial = 1e-4;  // h
  double dt_min = 1e-7;
  double dt_max = 1e-2;
  double dt_growth = 1.2;
  int growth_after = 5;
  bool gravity = true;
  bool closed_box = false;  // no-flux on every wall, ignores the schedule

  void validate() const {
    if (!(picard_tol > 0)) throw ValidationError("picard_tol", "must be > 0");
    if (max_picard < 1) throw ValidationError("max_picard", "must be >= 1");
    if (!(dt_min > 0 && dt_min <= dt_initial && dt_initial <= dt_max))
      throw ValidationError("dt_initial", "need 0 < dt_min <= dt_initial <= dt_max");
  }
};

struct State {
  ScalarGrid h_w;
  ScalarGrid h_nw;
  double t = 0.0;
};

struct Snapshot {
  double t = 0.0;
  ScalarGrid S_nw;
  ScalarGrid v_nw_abs;
  ScalarGrid h_nw;
  ScalarGrid h_w;
};

/// Cell-centre Darcy flux densities (cm/h).
struct VelocityField {
  ScalarGrid v_w_x, v_w_y;
  ScalarGrid v_nw_x, v_nw_y;
  ScalarGrid v_nw_abs;
};

/// Net amount that entered the domain through its boundary.
struct BoundaryExchange {
  double water_volume = 0.0;  // cm^3 per cm depth
  double air_mass = 0.0;      // g per cm depth
  double water_abs = 0.0;     // sum of |water exchange|
  double air_abs = 0.0;

  BoundaryExchange& operator+=(const BoundaryExchange& o) {
    water_volume += o.water_volume;
    air_mass += o.air_mass;
    water_abs += o.water_abs;
    air_abs += o.air_abs;
    return *this;
  }
};

struct StepResult {
  State state;
  int iterations = 0;
  double residual = 0.0;
  BoundaryExchange exchange;
};

struct MassResidual {
  double water = 0.0;
  double air = 0.0;
};

/// Two-phase column model: geometry, parameters and boundary data bound
/// together so time steps only need the state.
class ColumnModel {
 public:
  ColumnModel(GridGeometry geom, const ParameterField& field, SoilProps soil,
              FluidProps fluids, BoundarySchedule schedule,
              SolverOptions options = {})
      : geom_(geom),
        soil_(soil),
        fluids_(fluids),
        schedule_(schedule),
        options_(options) {
    geom_.validate();
    soil_.validate();
    fluids_.validate();
    schedule_.validate();
    options_.validate();
    if (field.nx != geom_.nx || field.ny != geom_.ny)
      throw ValidationError("field", "dimensions do not match the grid");
    const std::size_t n = geom_.nx * geom_.ny;
    params_.reserve(n);
    k_.resize(n);
    disk_.resize(n);
    for (std::size_t j = 0; j < geom_.ny; ++j) {
      for (std::size_t i = 0; i < geom_.nx; ++i) {
        const std::size_t c = cell(i, j);
        params_.emplace_back(soil_.alpha, field.n_vg(i, j), soil_.eta,
                             soil_.theta_r, field.theta_s(i, j));
        disk_[c] = geom_.is_disk_row(j);
        k_[c] = disk_[c] ? soil_.disk_permeability : field.k_intrinsic(i, j);
      }
    }
    build_pattern();
  }

  const GridGeometry& geometry() const noexcept { return geom_; }
  const FluidProps& fluids() const noexcept { return fluids_; }
  const BoundarySchedule& schedule() const noexcept { return schedule_; }
  const SolverOptions& options() const noexcept { return options_; }
  const VanGenuchtenParams& params(std::size_t c) const { return params_[c]; }
  double permeability(std::size_t c) const { return k_[c]; }
  bool is_disk(std::size_t c) const { return disk_[c]; }
  std::size_t cell(std::size_t i, std::size_t j) const noexcept {
    return j * geom_.nx + i;
  }
  double cell_area() const noexcept { return geom_.dx() * geom_.dy(); }

  /// Uniform air head and water in hydrostatic equilibrium with the outlet.
  State initial_state(double h_nw0 = 20.0) const {
    State s{ScalarGrid(geom_.nx, geom_.ny), ScalarGrid(geom_.nx, geom_.ny, h_nw0), 0.0};
    const double base = schedule_.outlet_water_head(0.0);
    for (std::size_t j = 0; j < geom_.ny; ++j)
      for (std::size_t i = 0; i < geom_.nx; ++i)
        s.h_w(i, j) = base - (options_.gravity ? geom_.y_center(j) : 0.0);
    return s;
  }

  double water_content(const State& s, std::size_t c) const {
    return unsatnet::water_content(s.h_nw[c] - s.h_w[c], params_[c]);
  }

  double total_water(const State& s) const {
    double sum = 0.0;
    for (std::size_t c = 0; c < s.h_w.size(); ++c) sum += water_content(s, c);
    return sum * cell_area();
  }

  double total_air_mass(const State& s) const {
    double sum = 0.0;
    for (std::size_t c = 0; c < s.h_w.size(); ++c) {
      const double theta_nw = params_[c].theta_s() - water_content(s, c);
      sum += air_density(s.h_nw[c], fluids_) * theta_nw;
    }
    return sum * cell_area();
  }

  /// Non-wetting saturation S_nw = 1 - theta_w / theta_s per cell.
  ScalarGrid saturation_nw(const State& s) const {
    ScalarGrid out(geom_.nx, geom_.ny);
    for (std::size_t c = 0; c < out.size(); ++c)
      out[c] = 1.0 - water_content(s, c) / params_[c].theta_s();
    return out;
  }

  /// One backward-Euler step. Throws ConvergenceError when Picard stalls.
  StepResult advance(const State& prev, double dt) const;

  /// Volumetric flux densities (cm/h) on every face, walls included.
  /// x-faces are (nx+1) x ny, y-faces nx x (ny+1); positive along +x / +y.
  struct FaceFluxes {
    ScalarGrid qw_x, qa_x, qw_y, qa_y;
  };
  FaceFluxes face_fluxes(const State& s) const;

  VelocityField darcy_velocity(const State& s) const;

 private:
  struct Face {
    std::size_t p, q;   // q is the right or upper neighbour
    double trans_geom;  // face length / centre distance
    double dz;          // y_q - y_p
  };

  struct Coefficients {
    std::vector<double> t_w;   // per interior face, water conductance
    std::vector<double> t_nw;  // per interior face, air conductance
    std::vector<double> rho_face;
    std::vector<double> t_w_bottom;  // per bottom cell
    std::vector<double> t_nw_top;    // per top cell
    std::vector<double> rho_top;
  };

  double gravity_flag() const noexcept { return options_.gravity ? 1.0 : 0.0; }
  double conductivity_scale_w() const noexcept {
    return fluids_.rho_w * fluids_.gravity / fluids_.mu_w;
  }
  double conductivity_scale_nw() const noexcept {
    return fluids_.rho_w * fluids_.gravity / fluids_.mu_nw;
  }

  void build_pattern() {
    const double dx = geom_.dx();
    const double dy = geom_.dy();
    for (std::size_t j = 0; j < geom_.ny; ++j) {
      for (std::size_t i = 0; i < geom_.nx; ++i) {
        if (i + 1 < geom_.nx) faces_.push_back({cell(i, j), cell(i + 1, j), dy / dx, 0.0});
        if (j + 1 < geom_.ny) faces_.push_back({cell(i, j), cell(i, j + 1), dx / dy, dy});
      }
    }
  }

  static double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

  Coefficients coefficients(const State& s, double t) const;

  GridGeometry geom_;
  SoilProps soil_;
  FluidProps fluids_;
  BoundarySchedule schedule_;
  SolverOptions options_;
  std::vector<VanGenuchtenParams> params_;
  std::vector<double> k_;
  std::vector<bool> disk_;
  std::vector<Face> faces_;
};

inline ColumnModel::Coefficients ColumnModel::coefficients(const State& s,
                                                           double t) const {
  Coefficients co;
  const std::size_t n = s.h_w.size();
  std::vector<double> s_e(n), rho(n);
  for (std::size_t c = 0; c < n; ++c) {
    s_e[c] = effective_saturation(s.h_nw[c] - s.h_w[c], params_[c]);
    rho[c] = air_density(s.h_nw[c], fluids_);
  }
  const double g = gravity_flag();
  const double kw = conductivity_scale_w();
  const double knw = conductivity_scale_nw();
  co.t_w.resize(faces_.size());
  co.t_nw.resize(faces_.size());
  co.rho_face.resize(faces_.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& fc = faces_[f];
    const double k_face = harmonic(k_[fc.p], k_[fc.q]);
    // Upstream cell by phase potential.
    const double phi_w_p = s.h_w[fc.p];
    const double phi_w_q = s.h_w[fc.q] + g * fc.dz;
    const std::size_t up_w = phi_w_p >= phi_w_q ? fc.p : fc.q;
    co.t_w[f] = kw * k_face * rel_perm_wetting(s_e[up_w], params_[up_w]) * fc.trans_geom;

    const double rho_f = 0.5 * (rho[fc.p] + rho[fc.q]);
    co.rho_face[f] = rho_f;
    if (disk_[fc.p] || disk_[fc.q]) {
      co.t_nw[f] = 0.0;
    } else {
      const double phi_a_p = s.h_nw[fc.p];
      const double phi_a_q = s.h_nw[fc.q] + g * (rho_f / fluids_.rho_w) * fc.dz;
      const std::size_t up_a = phi_a_p >= phi_a_q ? fc.p : fc.q;
      co.t_nw[f] = knw * k_face * rel_perm_nonwetting(s_e[up_a], params_[up_a]) *
                   fc.trans_geom;
    }
  }
  co.t_w_bottom.assign(geom_.nx, 0.0);
  co.t_nw_top.assign(geom_.nx, 0.0);
  co.rho_top.assign(geom_.nx, 0.0);
  if (!options_.closed_box) {
    const double half_geom = geom_.dx() / (0.5 * geom_.dy());
    const double h_top = schedule_.inlet_air_head(t);
    const double rho_b = air_density(h_top, fluids_);
    for (std::size_t i = 0; i < geom_.nx; ++i) {
      const std::size_t b = cell(i, 0);
      co.t_w_bottom[i] = kw * k_[b] * rel_perm_wetting(s_e[b], params_[b]) * half_geom;
      const std::size_t top = cell(i, geom_.ny - 1);
      co.rho_top[i] = 0.5 * (rho[top] + rho_b);
      co.t_nw_top[i] = disk_[top] ? 0.0
                                  : knw * k_[top] *
                                        rel_perm_nonwetting(s_e[top], params_[top]) *
                                        half_geom;
    }
  }
  return co;
}

inline StepResult ColumnModel::advance(const State& prev, double dt) const {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be > 0");
  if (prev.h_w.nx() != geom_.nx || prev.h_w.ny() != geom_.ny)
    throw ValidationError("state", "does not match the grid");

  const std::size_t n = geom_.nx * geom_.ny;
  const double t_new = prev.t + dt;
  const double vol = cell_area();
  const double g = gravity_flag();
  const double rho_w = fluids_.rho_w;
  const double lambda = fluids_.lambda;
  const double h_top = schedule_.inlet_air_head(t_new);
  const double h_out = schedule_.outlet_water_head(t_new);
  const double half_dy = 0.5 * geom_.dy();
  // Regularisation on the Picard increment keeps fully saturated,
  // air-immobile cells non-singular; it vanishes at convergence.
  constexpr double kRegW = 1e-10;
  constexpr double kRegA = 1e-16;

  std::vector<double> w_old(n), a_old(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double th = water_content(prev, c);
    w_old[c] = th;
    a_old[c] = air_density(prev.h_nw[c], fluids_) * (params_[c].theta_s() - th);
  }

  State it = prev;
  it.t = t_new;
  Eigen::SparseMatrix<double> A(2 * n, 2 * n);
  Eigen::VectorXd rhs(2 * n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * n + 8 * faces_.size());
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analysed = false;

  double residual = 0.0;
  for (int iter = 1; iter <= options_.max_picard; ++iter) {
    const Coefficients co = coefficients(it, t_new);
    trip.clear();
    rhs.setZero();
    for (std::size_t c = 0; c < n; ++c) {
      const VanGenuchtenParams& p = params_[c];
      const double hc = it.h_nw[c] - it.h_w[c];
      const double th = unsatnet::water_content(hc, p);
      const double cap = capillary_capacity(hc, p);  // <= 0
      const double rho = air_density(it.h_nw[c], fluids_);
      const double theta_nw = p.theta_s() - th;
      const double s = vol / dt;
      const std::size_t rw = 2 * c, ra = 2 * c + 1;
      // Unknowns are the Picard increments d = h^{m+1} - h^m; rhs holds the
      // negated residual, built from flux differences so an exact
      // equilibrium yields an exactly zero increment.
      // water: s*[th + cap*(d_nw - d_w) - w_old] + s*reg*d_w
      trip.emplace_back(rw, rw, s * (-cap + kRegW));
      trip.emplace_back(rw, ra, s * cap);
      rhs[rw] = -s * (th - w_old[c]);
      // air: s*[rho*theta_nw + (theta_nw*lambda - rho*cap)*d_nw + rho*cap*d_w - a_old]
      const double a_nw = theta_nw * lambda - rho * cap + kRegA;
      const double a_w = rho * cap;
      trip.emplace_back(ra, ra, s * a_nw);
      trip.emplace_back(ra, rw, s * a_w);
      rhs[ra] = -s * (rho * theta_nw - a_old[c]);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const Face& fc = faces_[f];
      // Water flux p->q = t_w * (h_w,p - h_w,q - g*dz)
      const double tw = co.t_w[f];
      const std::size_t pw = 2 * fc.p, qw = 2 * fc.q;
      trip.emplace_back(pw, pw, tw);
      trip.emplace_back(pw, qw, -tw);
      trip.emplace_back(qw, qw, tw);
      trip.emplace_back(qw, pw, -tw);
      const double flux_w = tw * (it.h_w[fc.p] - it.h_w[fc.q] - g * fc.dz);
      rhs[pw] -= flux_w;
      rhs[qw] += flux_w;
      // Air mass flux p->q = rho_f * t_nw * (h_nw,p - h_nw,q - g*rho_f/rho_w*dz)
      const double ta = co.rho_face[f] * co.t_nw[f];
      const double grav_a = g * co.rho_face[f] / rho_w * fc.dz;
      const std::size_t pa = pw + 1, qa = qw + 1;
      trip.emplace_back(pa, pa, ta);
      trip.emplace_back(pa, qa, -ta);
      trip.emplace_back(qa, qa, ta);
      trip.emplace_back(qa, pa, -ta);
      const double flux_a = ta * (it.h_nw[fc.p] - it.h_nw[fc.q] - grav_a);
      rhs[pa] -= flux_a;
      rhs[qa] += flux_a;
    }
    for (std::size_t i = 0; i < geom_.nx; ++i) {
      // Bottom: inflow = t * (h_out - h_w,p - g*y_p)
      const std::size_t b = cell(i, 0);
      const double tw = co.t_w_bottom[i];
      trip.emplace_back(2 * b, 2 * b, tw);
      rhs[2 * b] += tw * (h_out - it.h_w[b] - g * half_dy);
      // Top: air inflow = rho_f * t * (h_top - h_nw,p + g*rho_f/rho_w*(H - y_p)),
      // wall potential minus centre potential.
      const std::size_t top = cell(i, geom_.ny - 1);
      const double ta = co.rho_top[i] * co.t_nw_top[i];
      const double grav_a = g * co.rho_top[i] / rho_w * half_dy;
      trip.emplace_back(2 * top + 1, 2 * top + 1, ta);
      rhs[2 * top + 1] += ta * (h_top - it.h_nw[top] + grav_a);
    }
    A.setFromTriplets(trip.begin(), trip.end());
    if (!analysed) {
      lu.analyzePattern(A);
      analysed = true;
    }
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw ConvergenceError("linear solve failed", iter, residual);
    const Eigen::VectorXd d = lu.solve(rhs);
    if (!d.allFinite()) throw ConvergenceError("nonfinite heads", iter, residual);

    double max_update = 0.0;
    double max_head = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
      it.h_w[c] += d[2 * c];
      it.h_nw[c] += d[2 * c + 1];
      max_update = std::max({max_update, std::abs(d[2 * c]), std::abs(d[2 * c + 1])});
      max_head = std::max({max_head, std::abs(it.h_w[c]), std::abs(it.h_nw[c])});
    }
    residual = max_update / max_head;
    for (std::size_t c = 0; c < n; ++c) {
      if (!(fluids_.rho_0_nw + lambda * it.h_nw[c] > 0.0))
        throw ConvergenceError("air density became nonpositive", iter, residual);
    }
    if (residual < options_.picard_tol) {
      StepResult out;
      out.state = it;
      out.iterations = iter;
      out.residual = residual;
      // Boundary exchange with the coefficients used in the final solve.
      for (std::size_t i = 0; i < geom_.nx; ++i) {
        const std::size_t b = cell(i, 0);
        const double qw = co.t_w_bottom[i] * (h_out - it.h_w[b] - g * half_dy) * dt;
        const std::size_t top = cell(i, geom_.ny - 1);
        const double qa = co.rho_top[i] * co.t_nw_top[i] *
                          (h_top - it.h_nw[top] + g * co.rho_top[i] / rho_w * half_dy) * dt;
        out.exchange.water_volume += qw;
        out.exchange.air_mass += qa;
        out.exchange.water_abs += std::abs(qw);
        out.exchange.air_abs += std::abs(qa);
      }
      return out;
    }
  }
  throw ConvergenceError("picard iteration did not converge", options_.max_picard,
                         residual);
}

inline ColumnModel::FaceFluxes ColumnModel::face_fluxes(const State& s) const {
  const std::size_t nx = geom_.nx, ny = geom_.ny;
  const Coefficients co = coefficients(s, s.t);
  const double g = gravity_flag();
  const double dx = geom_.dx(), dy = geom_.dy();
  // Face flux densities: x-faces (nx+1) x ny, y-faces nx x (ny+1).
  FaceFluxes ff{ScalarGrid(nx + 1, ny), ScalarGrid(nx + 1, ny), ScalarGrid(nx, ny + 1),
                ScalarGrid(nx, ny + 1)};
  auto& qw_x = ff.qw_x;
  auto& qa_x = ff.qa_x;
  auto& qw_y = ff.qw_y;
  auto& qa_y = ff.qa_y;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& fc = faces_[f];
    const bool vertical = fc.dz != 0.0;
    const double face_len = vertical ? dx : dy;
    const double vw = co.t_w[f] * (s.h_w[fc.p] - s.h_w[fc.q] - g * fc.dz) / face_len;
    const double va = co.t_nw[f] *
                      (s.h_nw[fc.p] - s.h_nw[fc.q] - g * co.rho_face[f] / fluids_.rho_w * fc.dz) /
                      face_len;
    const std::size_t i = fc.p % nx, j = fc.p / nx;
    if (vertical) {
      qw_y(i, j + 1) = vw;
      qa_y(i, j + 1) = va;
    } else {
      qw_x(i + 1, j) = vw;
      qa_x(i + 1, j) = va;
    }
  }
  if (!options_.closed_box) {
    const double h_top = schedule_.inlet_air_head(s.t);
    const double h_out = schedule_.outlet_water_head(s.t);
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t b = cell(i, 0);
      // Upward flux through the bottom wall.
      qw_y(i, 0) = co.t_w_bottom[i] * (h_out - s.h_w[b] - g * 0.5 * dy) / dx;
      const std::size_t top = cell(i, ny - 1);
      qa_y(i, ny) = -co.t_nw_top[i] *
                    (h_top - s.h_nw[top] + g * co.rho_top[i] / fluids_.rho_w * 0.5 * dy) / dx;
    }
  }
  return ff;
}

inline VelocityField ColumnModel::darcy_velocity(const State& s) const {
  const std::size_t nx = geom_.nx, ny = geom_.ny;
  const FaceFluxes ff = face_fluxes(s);
  const auto& qw_x = ff.qw_x;
  const auto& qa_x = ff.qa_x;
  const auto& qw_y = ff.qw_y;
  const auto& qa_y = ff.qa_y;
  VelocityField v;
  v.v_w_x = v.v_w_y = v.v_nw_x = v.v_nw_y = v.v_nw_abs = ScalarGrid(nx, ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      v.v_w_x(i, j) = 0.5 * (qw_x(i, j) + qw_x(i + 1, j));
      v.v_w_y(i, j) = 0.5 * (qw_y(i, j) + qw_y(i, j + 1));
      v.v_nw_x(i, j) = 0.5 * (qa_x(i, j) + qa_x(i + 1, j));
      v.v_nw_y(i, j) = 0.5 * (qa_y(i, j) + qa_y(i, j + 1));
      v.v_nw_abs(i, j) = std::hypot(v.v_nw_x(i, j), v.v_nw_y(i, j));
    }
  }
  return v;
}

/// Conservation check between two states given what crossed the boundary.
inline MassResidual mass_balance(const ColumnModel& model, const State& before,
                                 const State& after,
                                 const BoundaryExchange& exchange) {
  return {model.total_water(after) - model.total_water(before) - exchange.water_volume,
          model.total_air_mass(after) - model.total_air_mass(before) - exchange.air_mass};
}

inline Snapshot make_snapshot(const ColumnModel& model, const State& s) {
  Snapshot snap;
  snap.t = s.t;
  snap.S_nw = model.saturation_nw(s);
  snap.v_nw_abs = model.darcy_velocity(s).v_nw_abs;
  snap.h_nw = s.h_nw;
  snap.h_w = s.h_w;
  return snap;
}

struct RunStats {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t picard_iterations = 0;
  double dt_min_used = 0.0;
  double dt_max_used = 0.0;
  double max_water_residual_ratio = 0.0;  // |residual| / cumulative |exchange|
  double max_air_residual_ratio = 0.0;
  BoundaryExchange cumulative;
};

struct SimulationResult {
  std::vector<Snapshot> snapshots;
  RunStats stats;
};

/// Integrates from t = 0 to the last snapshot time with adaptive dt, emitting
/// a snapshot at every requested time.
inline SimulationResult run_simulation(const ColumnModel& model,
                                       const std::vector<double>& snapshot_times,
                                       double h_nw0 = 20.0) {
  const SolverOptions& opt = model.options();
  for (std::size_t k = 0; k < snapshot_times.size(); ++k) {
    if (snapshot_times[k] < 0.0 || (k > 0 && snapshot_times[k] <= snapshot_times[k - 1]))
      throw ValidationError("snapshot_times", "must be nonnegative and strictly increasing");
  }
  SimulationResult result;
  State state = model.initial_state(h_nw0);
  double dt = opt.dt_initial;
  int streak = 0;
  RunStats& st = result.stats;
  st.dt_min_used = opt.dt_max;
  for (double target : snapshot_times) {
    while (target - state.t > 1e-12 * std::max(1.0, target)) {
      const double remaining = target - state.t;
      const double step = std::min(dt, remaining);
      try {
        StepResult r = model.advance(state, step);
        const MassResidual mb = mass_balance(model, state, r.state, r.exchange);
        st.cumulative += r.exchange;
        constexpr double kFloor = 1e-300;
        st.max_water_residual_ratio =
            std::max(st.max_water_residual_ratio,
                     std::abs(mb.water) / std::max(st.cumulative.water_abs, kFloor));
        st.max_air_residual_ratio =
            std::max(st.max_air_residual_ratio,
                     std::abs(mb.air) / std::max(st.cumulative.air_abs, kFloor));
        state = std::move(r.state);
        if (step >= remaining) state.t = target;
        ++st.accepted_steps;
        st.picard_iterations += static_cast<std::size_t>(r.iterations);
        st.dt_min_used = std::min(st.dt_min_used, step);
        st.dt_max_used = std::max(st.dt_max_used, step);
        if (++streak >= opt.growth_after && step == dt) {
          dt = std::min(dt * opt.dt_growth, opt.dt_max);
          streak = 0;
        }
      } catch (const ConvergenceError& e) {
        ++st.rejected_steps;
        streak = 0;
        dt = step * 0.5;
        if (dt < opt.dt_min)
          throw ConvergenceError(std::string("time step underflow: ") + e.what(),
                                 e.iterations(), e.residual());
      }
    }
    result.snapshots.push_back(make_snapshot(model, state));
  }
  return result;
}

}  // namespace unsatnet
