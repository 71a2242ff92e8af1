#pragma once

// Capillary and relative-permeability closures for the air/water system:
// van Genuchten retention, Mualem-van Genuchten permeabilities, and a
// quadrature evaluation of the Mualem integrals that the closed forms must
// agree with.

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "unsatnet/error.hpp"

namespace unsatnet {

/// Van Genuchten parameters for one cell. `m` is always 1 - 1/n.
class VanGenuchtenParams {
 public:
  VanGenuchtenParams(double alpha, double n, double eta, double theta_r,
                     double theta_s)
      : alpha_(alpha), n_(n), eta_(eta), theta_r_(theta_r), theta_s_(theta_s) {
    if (!(alpha > 0.0)) throw ValidationError("alpha", "must be > 0");
    if (!(n > 1.0)) throw ValidationError("n", "must be > 1");
    if (!(eta >= 0.0)) throw ValidationError("eta", "must be >= 0");
    if (!(theta_r >= 0.0 && theta_r <= theta_s && theta_s <= 1.0))
      throw ValidationError("theta", "need 0 <= theta_r <= theta_s <= 1");
  }

  double alpha() const noexcept { return alpha_; }
  double n() const noexcept { return n_; }
  double m() const noexcept { return 1.0 - 1.0 / n_; }
  double eta() const noexcept { return eta_; }
  double theta_r() const noexcept { return theta_r_; }
  double theta_s() const noexcept { return theta_s_; }

 private:
  double alpha_;
  double n_;
  double eta_;
  double theta_r_;
  double theta_s_;
};

/// Fluid properties in the cm-g-hour system. Heads are cm of water.
struct FluidProps {
  double mu_w = 36.0;        // g/(cm h), water at ~20 C
  double mu_nw = 0.648;      // g/(cm h), air
  double rho_w = 1.0;        // g/cm^3
  double rho_0_nw = 1.2e-3;  // g/cm^3
  double lambda = 1.24e-6;   // g/cm^4, compressibility rho_0_nw / h0_nw
  double gravity = 12709418400.0;  // cm/h^2, 980.665 cm/s^2

  double h0_nw() const noexcept { return rho_0_nw / lambda; }

  void validate() const {
    if (!(mu_w > 0)) throw ValidationError("mu_w", "must be > 0");
    if (!(mu_nw > 0)) throw ValidationError("mu_nw", "must be > 0");
    if (!(rho_w > 0)) throw ValidationError("rho_w", "must be > 0");
    if (!(rho_0_nw > 0)) throw ValidationError("rho_0_nw", "must be > 0");
    if (!(lambda > 0)) throw ValidationError("lambda", "must be > 0");
    if (!(gravity > 0)) throw ValidationError("gravity", "must be > 0");
  }
};

/// S_ew = [1 + (alpha h_c)^n]^-m. Negative capillary heads are saturated.
inline double effective_saturation(double h_c, const VanGenuchtenParams& p) {
  if (h_c <= 0.0) return 1.0;
  const double x = std::pow(p.alpha() * h_c, p.n());
  return std::pow(1.0 + x, -p.m());
}

inline double water_content(double h_c, const VanGenuchtenParams& p) {
  return p.theta_r() + (p.theta_s() - p.theta_r()) * effective_saturation(h_c, p);
}

/// dtheta_w/dh_c, nonpositive.
inline double capillary_capacity(double h_c, const VanGenuchtenParams& p) {
  if (h_c <= 0.0) return 0.0;
  const double n = p.n();
  const double m = p.m();
  const double ah = p.alpha() * h_c;
  const double x = std::pow(ah, n);
  // dS/dh = -m n alpha (alpha h)^(n-1) (1 + x)^(-m-1)
  const double dS = -m * n * p.alpha() * std::pow(ah, n - 1.0) *
                    std::pow(1.0 + x, -m - 1.0);
  return (p.theta_s() - p.theta_r()) * dS;
}

/// Capillary head for a given effective saturation (inverse of the retention
/// curve). Returns +inf at S_e = 0 and 0 at S_e >= 1.
inline double capillary_head(double s_e, const VanGenuchtenParams& p) {
  if (s_e >= 1.0) return 0.0;
  if (s_e <= 0.0) return std::numeric_limits<double>::infinity();
  const double base = std::expm1(-std::log(s_e) / p.m());
  return std::pow(base, 1.0 / p.n()) / p.alpha();
}

inline double rel_perm_wetting(double s_e, const VanGenuchtenParams& p) {
  s_e = std::clamp(s_e, 0.0, 1.0);
  if (s_e == 0.0) return 0.0;
  const double m = p.m();
  const double inner = 1.0 - std::pow(1.0 - std::pow(s_e, 1.0 / m), m);
  return std::pow(s_e, p.eta()) * inner * inner;
}

inline double rel_perm_nonwetting(double s_e, const VanGenuchtenParams& p) {
  s_e = std::clamp(s_e, 0.0, 1.0);
  if (s_e == 1.0) return 0.0;
  const double m = p.m();
  return std::pow(1.0 - s_e, p.eta()) *
         std::pow(1.0 - std::pow(s_e, 1.0 / m), 2.0 * m);
}

namespace detail {

// Integral of dS/h_c(S) over [lo, hi] within (0, 1]. The integrand behaves
// like (1 - S)^(-1/n) as S -> 1; tanh-sinh handles the endpoint and is given
// the distance to the endpoint so 1 - S never loses precision.
inline double mualem_integral(double lo, double hi, const VanGenuchtenParams& p) {
  constexpr double kCutoff = 1e-9;
  constexpr double kRelTol = 1e-7;
  lo = std::max(lo, kCutoff);
  if (hi <= lo) return 0.0;
  const double inv_m = 1.0 / p.m();
  const double inv_n = 1.0 / p.n();
  const double width = hi - lo;
  auto integrand = [&](double s, double sc) {
    // sc is the distance from s to the nearer endpoint of [lo, hi].
    double one_minus_s = 1.0 - s;
    if (hi == 1.0 && s > lo + 0.5 * width) one_minus_s = sc;
    if (one_minus_s <= 0.0) return 0.0;
    // S^(-1/m) - 1 = expm1(-(1/m) log1p(-(1 - S)))
    const double base = std::expm1(-inv_m * std::log1p(-one_minus_s));
    if (base <= 0.0) return 0.0;
    return p.alpha() / std::pow(base, inv_n);
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double value =
      integrator.integrate(integrand, lo, hi, kRelTol * 1e-2, &error, &l1);
  if (!(std::isfinite(value)) || error > kRelTol * std::abs(value)) {
    throw ConvergenceError("mualem quadrature did not reach relative 1e-7", 0,
                           error);
  }
  return value;
}

}  // namespace detail

/// k_rw evaluated from the Mualem integral form by numeric quadrature.
inline double mualem_quadrature_wetting(double s_e, const VanGenuchtenParams& p) {
  if (s_e <= 0.0) return 0.0;
  if (s_e >= 1.0) return 1.0;
  const double total = detail::mualem_integral(0.0, 1.0, p);
  const double part = detail::mualem_integral(0.0, s_e, p);
  const double ratio = part / total;
  return std::pow(s_e, p.eta()) * ratio * ratio;
}

/// k_rnw evaluated from the Mualem integral form by numeric quadrature.
inline double mualem_quadrature_nonwetting(double s_e,
                                           const VanGenuchtenParams& p) {
  if (s_e <= 0.0) return 1.0;
  if (s_e >= 1.0) return 0.0;
  const double total = detail::mualem_integral(0.0, 1.0, p);
  const double part = detail::mualem_integral(s_e, 1.0, p);
  const double ratio = part / total;
  return std::pow(1.0 - s_e, p.eta()) * ratio * ratio;
}

/// Air density, linear in the air pressure head.
inline double air_density(double h_nw, const FluidProps& f) {
  const double rho = f.rho_0_nw + f.lambda * h_nw;
  if (!(rho > 0.0)) {
    throw DomainError("air density nonpositive at h_nw=" + std::to_string(h_nw));
  }
  return rho;
}

}  // namespace unsatnet
