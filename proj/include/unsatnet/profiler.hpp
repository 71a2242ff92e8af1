#pragma once

// Resampling of snapshot grids onto an observation lattice and extraction of
// vertical profiles (one network node per lattice column).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "unsatnet/error.hpp"
#include "unsatnet/grid.hpp"
#include "unsatnet/solver.hpp"

namespace unsatnet {

/// Axis-aligned rectangle in physical coordinates (cm).
struct Region {
  double x0 = 0.0, x1 = 0.0;
  double y0 = 0.0, y1 = 0.0;
};

/// Cell-centre hull above the disk: the area the networks are built on.
inline Region upper_region(const GridGeometry& g) {
  const std::size_t first = std::min(g.disk_rows(), g.ny - 1);
  return {g.x_center(0), g.x_center(g.nx - 1), g.y_center(first),
          g.y_center(g.ny - 1)};
}

/// Values on an X x Y lattice; lattice(i, j) with i along x, j along y.
struct Lattice {
  Region region;
  ScalarGrid values;
};

namespace detail {

// Fractional cell-centre index of coordinate `c`, clamped to [0, n-1] and
// snapped to an integer when within 1e-9 so coincident points copy exactly.
inline double center_index(double c, double h, std::size_t n) {
  double f = c / h - 0.5;
  const double r = std::round(f);
  if (std::abs(f - r) < 1e-9) f = r;
  return std::clamp(f, 0.0, static_cast<double>(n - 1));
}

inline double lattice_coord(double a, double b, std::size_t k, std::size_t count) {
  if (k + 1 == count) return b;
  return a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1);
}

}  // namespace detail

/// Bilinear interpolation of a cell-centred grid onto an X x Y lattice that
/// spans `region` exactly (corners included). Points between the wall and the
/// first cell centre take the nearest centre value.
inline Lattice resample(const ScalarGrid& grid, const GridGeometry& geom,
                        std::size_t X, std::size_t Y, const Region& region) {
  if (X < 2 || Y < 2) throw ValidationError("lattice", "X and Y must be >= 2");
  if (grid.nx() != geom.nx || grid.ny() != geom.ny)
    throw ValidationError("grid", "does not match geometry");
  constexpr double kTol = 1e-12;
  if (region.x0 < -kTol || region.x1 > geom.width + kTol || region.y0 < -kTol ||
      region.y1 > geom.column_height + kTol || !(region.x0 <= region.x1) ||
      !(region.y0 <= region.y1)) {
    throw ValidationError("region", "out of bounds of the domain");
  }
  Lattice out{region, ScalarGrid(X, Y)};
  const double dx = geom.dx(), dy = geom.dy();
  for (std::size_t b = 0; b < Y; ++b) {
    const double fy =
        detail::center_index(detail::lattice_coord(region.y0, region.y1, b, Y), dy, geom.ny);
    const std::size_t j0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t j1 = std::min(j0 + 1, geom.ny - 1);
    const double wy = fy - static_cast<double>(j0);
    for (std::size_t a = 0; a < X; ++a) {
      const double fx = detail::center_index(
          detail::lattice_coord(region.x0, region.x1, a, X), dx, geom.nx);
      const std::size_t i0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t i1 = std::min(i0 + 1, geom.nx - 1);
      const double wx = fx - static_cast<double>(i0);
      double v;
      if (wx == 0.0 && wy == 0.0) {
        v = grid(i0, j0);
      } else if (wx == 0.0) {
        v = (1.0 - wy) * grid(i0, j0) + wy * grid(i0, j1);
      } else if (wy == 0.0) {
        v = (1.0 - wx) * grid(i0, j0) + wx * grid(i1, j0);
      } else {
        v = (1.0 - wx) * (1.0 - wy) * grid(i0, j0) + wx * (1.0 - wy) * grid(i1, j0) +
            (1.0 - wx) * wy * grid(i0, j1) + wx * wy * grid(i1, j1);
      }
      out.values(a, b) = v;
    }
  }
  return out;
}

/// N profiles of length L; values(i, k) is sample k of profile i.
struct ProfileSet {
  std::string field_name;
  double t = 0.0;
  Matrix<double> values;
  std::vector<double> x_positions;

  std::size_t N() const noexcept { return values.rows(); }
  std::size_t L() const noexcept { return values.cols(); }
  std::span<const double> profile(std::size_t i) const { return values.row(i); }
};

/// Profile i is lattice column i (all y samples at fixed x).
inline ProfileSet extract_profiles(const Lattice& lattice, std::string field_name,
                                   double t) {
  const std::size_t X = lattice.values.nx(), Y = lattice.values.ny();
  ProfileSet ps{std::move(field_name), t, Matrix<double>(X, Y), std::vector<double>(X)};
  for (std::size_t i = 0; i < X; ++i) {
    ps.x_positions[i] = detail::lattice_coord(lattice.region.x0, lattice.region.x1, i, X);
    for (std::size_t k = 0; k < Y; ++k) ps.values(i, k) = lattice.values(i, k);
  }
  return ps;
}

/// Min-max scaling to [0, 1]; non-finite entries are left untouched and a
/// degenerate range maps every finite entry to 0.
inline std::vector<double> normalize_unit_interval(std::span<const double> values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) throw ValidationError("values", "no finite entries");
  std::vector<double> out(values.begin(), values.end());
  const double range = hi - lo;
  for (double& v : out) {
    if (!std::isfinite(v)) continue;
    if (range > 0.0) {
      v = v == hi ? 1.0 : (v - lo) / range;
    } else {
      v = 0.0;
    }
  }
  return out;
}

}  // namespace unsatnet
