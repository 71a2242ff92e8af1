#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "unsatnet/solver.hpp"

using namespace unsatnet;

namespace {

GridGeometry small_grid(std::size_t nx, std::size_t ny, double disk = 0.74) {
  GridGeometry g;
  g.nx = nx;
  g.ny = ny;
  g.disk_thickness = disk;
  return g;
}

ParameterField homogeneous(const GridGeometry& g) { return ParameterField::uniform(g.nx, g.ny, FieldSpecs{}); }

BoundarySchedule constant_heads(double h_nw, double h_w) {
  BoundarySchedule s;
  s.inlet_start = s.inlet_end = h_nw;
  s.outlet_start = s.outlet_end = h_w;
  return s;
}

double max_abs(const ScalarGrid& g) {
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST(Advance, ZeroGradientEquilibriumUnchanged) {
  const auto g = small_grid(8, 8);
  SolverOptions opt;
  opt.gravity = false;
  const ColumnModel model(g, homogeneous(g), SoilProps{}, FluidProps{}, constant_heads(20.0, 0.0), opt);
  const State s0{ScalarGrid(8, 8, 0.0), ScalarGrid(8, 8, 20.0), 0.0};
  const State s1 = model.advance(s0, 1e-3).state;
  for (std::size_t c = 0; c < 64; ++c) {
    EXPECT_NEAR(s1.h_w[c], 0.0, 1e-12);
    EXPECT_NEAR(s1.h_nw[c], 20.0, 1e-12);
  }
  const auto v = model.darcy_velocity(s1);
  EXPECT_EQ(max_abs(v.v_nw_abs), 0.0);
}

TEST(Advance, HydrostaticWaterHasNoFlux) {
  const auto g = small_grid(8, 16);
  SolverOptions opt;
  opt.closed_box = true;
  const FluidProps f;
  const ColumnModel model(g, homogeneous(g), SoilProps{}, f, BoundarySchedule{}, opt);
  // Water at slope -1 per cm. Air must be hydrostatic as well: a uniform air
  // head is not at rest under air buoyancy and would drag water along.
  // dh_nw/dy = -(rho_0 + lambda h_nw) / rho_w integrates to an exponential.
  State s = model.initial_state(20.0);
  const double a = f.lambda / f.rho_w, b = f.rho_0_nw / f.lambda;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      s.h_nw(i, j) = (20.0 + b) * std::exp(-a * g.y_center(j)) - b;
  const State s1 = model.advance(s, 1e-3).state;
  const auto ff = model.face_fluxes(s1);
  EXPECT_LT(max_abs(ff.qw_y), 1e-10);
  EXPECT_LT(max_abs(ff.qw_x), 1e-10);
}

TEST(Darcy, TwoCellHarmonicFlux) {
  auto g = small_grid(1, 2, 0.0);
  g.width = 1.0;
  g.column_height = 2.0;
  ParameterField field = homogeneous(g);
  field.k_intrinsic(0, 0) = 1e-9;
  field.k_intrinsic(0, 1) = 3e-9;
  SolverOptions opt;
  opt.gravity = false;
  opt.closed_box = true;
  const FluidProps f;
  const ColumnModel model(g, field, SoilProps{}, f, BoundarySchedule{}, opt);
  // Air head below water head: fully saturated, k_rw = 1.
  const State s{ScalarGrid(1, 2), ScalarGrid(1, 2, -5.0), 0.0};
  State st = s;
  st.h_w(0, 0) = 3.0;
  st.h_w(0, 1) = 1.0;
  const double K = 2.0 * 1e-9 * 3e-9 / (1e-9 + 3e-9) * f.rho_w * f.gravity / f.mu_w;
  const auto ff = model.face_fluxes(st);
  EXPECT_NEAR(ff.qw_y(0, 1), K * 2.0 / g.dy(), 1e-12 * K);
}

TEST(Darcy, SaturatedMeansNoAirVelocity) {
  const auto g = small_grid(6, 6);
  const ColumnModel model(g, homogeneous(g), SoilProps{}, FluidProps{}, BoundarySchedule{});
  State s{ScalarGrid(6, 6), ScalarGrid(6, 6), 0.0};
  for (std::size_t c = 0; c < 36; ++c) {
    s.h_w[c] = 10.0 + 0.3 * static_cast<double>(c % 5);
    s.h_nw[c] = 5.0 - 0.2 * static_cast<double>(c % 7);
  }
  const auto sat = model.saturation_nw(s);
  for (double v : sat) EXPECT_EQ(v, 0.0);
  const auto ff = model.face_fluxes(s);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t i = 1; i < 6; ++i) EXPECT_EQ(ff.qa_x(i, j), 0.0);
  for (std::size_t j = 1; j < 6; ++j)
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(ff.qa_y(i, j), 0.0);
}

TEST(Darcy, UniformHeadsNoGravityAreStill) {
  const auto g = small_grid(5, 5);
  SolverOptions opt;
  opt.gravity = false;
  opt.closed_box = true;
  const ColumnModel model(g, sample_field(5, 5, FieldSpecs{}, 3), SoilProps{}, FluidProps{}, BoundarySchedule{}, opt);
  const State s{ScalarGrid(5, 5, -3.0), ScalarGrid(5, 5, 20.0), 0.0};
  const auto v = model.darcy_velocity(s);
  EXPECT_EQ(max_abs(v.v_w_x) + max_abs(v.v_w_y) + max_abs(v.v_nw_abs), 0.0);
}

TEST(Simulation, InitialConditionOnly) {
  const auto g = small_grid(8, 8);
  BoundarySchedule sched;
  sched.t_end = 0.0;
  const ColumnModel model(g, homogeneous(g), SoilProps{}, FluidProps{}, sched);
  const auto r = run_simulation(model, {0.0});
  ASSERT_EQ(r.snapshots.size(), 1u);
  EXPECT_EQ(r.snapshots[0].h_nw, model.initial_state().h_nw);
  EXPECT_EQ(r.stats.accepted_steps, 0u);
}

TEST(Simulation, MassBalanceAndInvariants) {
  const auto g = small_grid(16, 16);
  BoundarySchedule sched;
  sched.inlet_end = 60.0;  // drive air in so the exchange is not negligible
  const ColumnModel model(g, sample_field(16, 16, FieldSpecs{}, 42), SoilProps{}, FluidProps{}, sched);
  const auto r = run_simulation(model, {0.05, 0.1, 0.2});
  ASSERT_EQ(r.snapshots.size(), 3u);
  EXPECT_LT(r.stats.max_water_residual_ratio, 1e-3);
  EXPECT_LT(r.stats.max_air_residual_ratio, 1e-3);
  for (const auto& snap : r.snapshots) {
    for (double v : snap.S_nw) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NEAR(r.snapshots.back().t, 0.2, 1e-15);
}

TEST(Simulation, NoAirThroughDisk) {
  const auto g = small_grid(8, 16);
  BoundarySchedule sched;
  sched.inlet_end = 60.0;
  const ColumnModel model(g, sample_field(8, 16, FieldSpecs{}, 1), SoilProps{}, FluidProps{}, sched);
  State s = model.initial_state();
  for (int k = 0; k < 20; ++k) {
    s = model.advance(s, 2e-3).state;
    const auto ff = model.face_fluxes(s);
    for (std::size_t i = 0; i < g.nx; ++i)
      for (std::size_t j = 0; j <= g.disk_rows(); ++j) EXPECT_EQ(ff.qa_y(i, j), 0.0) << i << "," << j;
    for (std::size_t j = 0; j < g.disk_rows(); ++j)
      for (std::size_t i = 0; i <= g.nx; ++i) EXPECT_EQ(ff.qa_x(i, j), 0.0);
  }
}

TEST(MassBalance, IdenticalStatesAndResum) {
  const auto g = small_grid(6, 6);
  const ColumnModel model(g, homogeneous(g), SoilProps{}, FluidProps{}, BoundarySchedule{});
  const State s = model.initial_state();
  const auto zero = mass_balance(model, s, s, {});
  EXPECT_EQ(zero.water, 0.0);
  EXPECT_EQ(zero.air, 0.0);
  double w = 0.0;
  for (std::size_t c = 0; c < 36; ++c) w += model.water_content(s, c) * model.cell_area();
  EXPECT_NEAR(model.total_water(s), w, 1e-14 * w);
}

TEST(MassBalance, ClosedBoxConserves) {
  const auto g = small_grid(16, 16);
  SolverOptions opt;
  opt.closed_box = true;
  const ColumnModel model(g, sample_field(16, 16, FieldSpecs{}, 5), SoilProps{}, FluidProps{}, BoundarySchedule{}, opt);
  State s = model.initial_state(40.0);
  const double w0 = model.total_water(s), a0 = model.total_air_mass(s);
  for (int k = 0; k < 50; ++k) s = model.advance(s, 1e-3).state;
  EXPECT_LT(std::abs(model.total_water(s) - w0), 1e-8 * w0);
  EXPECT_LT(std::abs(model.total_air_mass(s) - a0), 1e-8 * a0);
}

TEST(Scheme, MatchesExplicitOracleDuringInvasion) {
  // A transient where air actually invades, so the comparison is not trivial.
  const auto g = small_grid(16, 16);
  const ParameterField field = sample_field(16, 16, FieldSpecs{}, 42);
  BoundarySchedule sched;
  sched.t_end = 0.01;
  sched.inlet_end = 80.0;
  SolverOptions opt;
  opt.dt_max = 1e-4;
  const ColumnModel model(g, field, SoilProps{}, FluidProps{}, sched, opt);
  const auto r = run_simulation(model, {0.01});
  const ScalarGrid& si = r.snapshots.back().S_nw;
  oracle::ExplicitColumn ex{g, field, SoilProps{}, FluidProps{}, sched, true, {}, {}, 0.0};
  ex.init(20.0);
  for (int k = 0; k < 10000; ++k) ex.step(1e-6);
  const auto se = ex.saturation_nw();
  const auto s0 = model.saturation_nw(model.initial_state());
  double num = 0.0, den = 0.0, moved = 0.0;
  for (std::size_t c = 0; c < se.size(); ++c) {
    num += (si[c] - se[c]) * (si[c] - se[c]);
    den += se[c] * se[c];
    moved += (se[c] - s0[c]) * (se[c] - s0[c]);
  }
  EXPECT_GT(std::sqrt(moved / den), 0.05);  // the state did change
  EXPECT_LT(std::sqrt(num / den), 0.01);
}

TEST(Simulation, RefinementChangesMeanSaturationLittle) {
  auto mean_s = [](std::size_t n) {
    const auto g = small_grid(n, n);
    const ColumnModel model(g, homogeneous(g), SoilProps{}, FluidProps{}, BoundarySchedule{});
    const auto r = run_simulation(model, {1.0});
    double m = 0.0;
    for (double v : r.snapshots.back().S_nw) m += v;
    return m / static_cast<double>(n * n);
  };
  const double a = mean_s(16), b = mean_s(32);
  EXPECT_LT(std::abs(a - b) / b, 0.05);
}
