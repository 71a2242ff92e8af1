#include <gtest/gtest.h>

#include "unsatnet/profiler.hpp"

using namespace unsatnet;

namespace {

GridGeometry geometry(std::size_t nx, std::size_t ny) {
  GridGeometry g;
  g.nx = nx;
  g.ny = ny;
  return g;
}

Region centre_hull(const GridGeometry& g) {
  return {g.x_center(0), g.x_center(g.nx - 1), g.y_center(0), g.y_center(g.ny - 1)};
}

}  // namespace

TEST(Resample, CoincidentLatticeCopiesExactly) {
  const auto g = geometry(10, 8);
  ScalarGrid grid(10, 8);
  for (std::size_t j = 0; j < 8; ++j)
    for (std::size_t i = 0; i < 10; ++i) grid(i, j) = std::sin(1.0 + i) * std::cos(0.3 * j);
  const Lattice l = resample(grid, g, 10, 8, centre_hull(g));
  EXPECT_EQ(l.values, grid);
}

TEST(Resample, ReproducesLinearField) {
  const auto g = geometry(16, 12);
  ScalarGrid grid(16, 12);
  auto f = [](double x, double y) { return 2.0 * x - 3.0 * y + 0.5; };
  for (std::size_t j = 0; j < 12; ++j)
    for (std::size_t i = 0; i < 16; ++i) grid(i, j) = f(g.x_center(i), g.y_center(j));
  const Region r = centre_hull(g);
  const Lattice l = resample(grid, g, 23, 31, r);
  for (std::size_t b = 0; b < 31; ++b)
    for (std::size_t a = 0; a < 23; ++a) {
      const double x = r.x0 + (r.x1 - r.x0) * a / 22.0, y = r.y0 + (r.y1 - r.y0) * b / 30.0;
      EXPECT_NEAR(l.values(a, b), f(x, y), 1e-12);
    }
}

TEST(Resample, CornersHitRegionBounds) {
  const auto g = geometry(64, 64);
  const Region r = upper_region(g);
  EXPECT_GT(r.y0, g.disk_thickness);
  EXPECT_NEAR(r.y1, g.y_center(63), 1e-15);
  EXPECT_THROW(resample(ScalarGrid(64, 64), g, 10, 10, Region{-1, 1, 0, 1}), ValidationError);
  EXPECT_THROW(resample(ScalarGrid(64, 64), g, 1, 10, r), ValidationError);
}

TEST(Profiles, ColumnsBecomeProfiles) {
  Lattice l{{0, 1, 0, 1}, ScalarGrid(3, 4)};
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 3; ++i) l.values(i, j) = 10.0 * i + j;
  const ProfileSet ps = extract_profiles(l, "S_nw", 0.5);
  EXPECT_EQ(ps.N(), 3u);
  EXPECT_EQ(ps.L(), 4u);
  EXPECT_EQ(ps.values(2, 3), 23.0);
  EXPECT_EQ(ps.x_positions.back(), 1.0);
  EXPECT_EQ(ps.t, 0.5);
}

TEST(Normalize, UnitInterval) {
  const std::vector<double> v{2.0, 4.0, 3.0, std::nan("")};
  const auto n = normalize_unit_interval(v);
  EXPECT_EQ(n[0], 0.0);
  EXPECT_EQ(n[1], 1.0);
  EXPECT_EQ(n[2], 0.5);
  EXPECT_TRUE(std::isnan(n[3]));
  EXPECT_EQ(normalize_unit_interval(std::vector<double>{5, 5})[1], 0.0);
  EXPECT_THROW(normalize_unit_interval(std::vector<double>{std::nan("")}), ValidationError);
}
