#pragma once

// Uncorrelated Gaussian parameter fields (theta_s, intrinsic permeability,
// van Genuchten n) with clamping, reproducible from a 64-bit seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "unsatnet/error.hpp"
#include "unsatnet/grid.hpp"

namespace unsatnet {

/// Name recorded in run metadata so fields can be regenerated elsewhere.
inline constexpr const char* kFieldGeneratorName =
    "mt19937_64(splitmix64(seed+stream))+box-muller";

struct FieldSpec {
  double mean = 0.0;
  double std_dev = 0.0;
  double lower_clamp = 0.0;
  double upper_clamp = 0.0;

  void validate(const std::string& name) const {
    if (!(std_dev >= 0.0)) throw ValidationError(name, "std_dev must be >= 0");
    if (!(lower_clamp < upper_clamp))
      throw ValidationError(name, "lower_clamp must be < upper_clamp");
    if (!(mean >= lower_clamp && mean <= upper_clamp))
      throw ValidationError(name, "mean must lie within the clamps");
  }

  bool operator==(const FieldSpec&) const = default;
};

struct FieldSpecs {
  FieldSpec theta_s{0.35, 0.03, 0.25, 0.45};
  FieldSpec k_intrinsic{1.0e-9, 0.3e-9, 0.1e-9, 3.0e-9};  // cm^2
  FieldSpec n_vg{4.0, 0.5, 1.5, 8.0};

  bool operator==(const FieldSpecs&) const = default;
};

struct ParameterField {
  std::size_t nx = 0;
  std::size_t ny = 0;
  ScalarGrid theta_s;
  ScalarGrid k_intrinsic;
  ScalarGrid n_vg;
  std::uint64_t seed = 0;
  FieldSpecs specs;

  /// Homogeneous field equal to the spec means.
  static ParameterField uniform(std::size_t nx, std::size_t ny,
                                const FieldSpecs& specs) {
    ParameterField f;
    f.nx = nx;
    f.ny = ny;
    f.theta_s = ScalarGrid(nx, ny, specs.theta_s.mean);
    f.k_intrinsic = ScalarGrid(nx, ny, specs.k_intrinsic.mean);
    f.n_vg = ScalarGrid(nx, ny, specs.n_vg.mean);
    f.specs = specs;
    return f;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Standard normal deviates via Box-Muller on top of mt19937_64. Unlike
/// std::normal_distribution the sequence is the same on every standard library.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  // 53 random bits mapped to [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline void fill_field(ScalarGrid& grid, const FieldSpec& spec,
                       std::uint64_t seed) {
  NormalStream normal(seed);
  for (auto& v : grid) {
    const double draw = spec.mean + spec.std_dev * normal.next();
    v = std::clamp(draw, spec.lower_clamp, spec.upper_clamp);
  }
}

}  // namespace detail

/// Checks that clamping alone guarantees a physically admissible field.
inline void validate_specs(const FieldSpecs& specs, double theta_r) {
  specs.theta_s.validate("theta_s");
  specs.k_intrinsic.validate("k_intrinsic");
  specs.n_vg.validate("n_vg");
  if (!(specs.n_vg.lower_clamp > 1.0))
    throw ValidationError("n_vg", "lower_clamp must be > 1");
  if (!(specs.k_intrinsic.lower_clamp > 0.0))
    throw ValidationError("k_intrinsic", "lower_clamp must be > 0");
  if (!(specs.theta_s.lower_clamp > theta_r))
    throw ValidationError("theta_s", "lower_clamp must exceed theta_r");
  if (!(specs.theta_s.upper_clamp <= 1.0))
    throw ValidationError("theta_s", "upper_clamp must be <= 1");
}

/// Draws each cell independently from Normal(mean, std_dev) and clamps.
/// Each parameter uses its own stream so the three fields are independent.
inline ParameterField sample_field(std::size_t nx, std::size_t ny,
                                   const FieldSpecs& specs, std::uint64_t seed,
                                   double theta_r = 0.0) {
  if (nx < 1 || ny < 1) throw ValidationError("grid", "nx, ny must be >= 1");
  validate_specs(specs, theta_r);
  ParameterField f = ParameterField::uniform(nx, ny, specs);
  f.seed = seed;
  detail::fill_field(f.theta_s, specs.theta_s, detail::splitmix64(seed + 0));
  detail::fill_field(f.k_intrinsic, specs.k_intrinsic,
                     detail::splitmix64(seed + 1));
  detail::fill_field(f.n_vg, specs.n_vg, detail::splitmix64(seed + 2));
  return f;
}

}  // namespace unsatnet
