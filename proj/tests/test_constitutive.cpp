#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "unsatnet/constitutive.hpp"

using namespace unsatnet;

namespace {

VanGenuchtenParams params(double n, double eta = 0.5) { return {0.0189, n, eta, 0.021, 0.35}; }

// Mualem integral written over capillary head instead of saturation:
// int_{S}^{1} dS'/h(S') = int_{0}^{h(S)} |dS/dh| / h dh. Uses only the
// retention slope, none of the closed-form or saturation-space code.
double mualem_over_head(double h_lo, double h_hi, const VanGenuchtenParams& p) {
  // |dS/dh| / h = m n alpha^n h^(n-2) (1 + (alpha h)^n)^(-m-1), in logs.
  auto f = [&](double h) {
    if (!(h > 0.0) || std::isinf(h)) return 0.0;
    const double lx = p.n() * std::log(p.alpha() * h);
    const double l1x = lx > 40.0 ? lx : std::log1p(std::exp(lx));
    return std::exp(std::log(p.m() * p.n()) + p.n() * std::log(p.alpha()) +
                    (p.n() - 2.0) * std::log(h) - (p.m() + 1.0) * l1x);
  };
  boost::math::quadrature::tanh_sinh<double> finite;
  boost::math::quadrature::exp_sinh<double> tail;
  const double inf = std::numeric_limits<double>::infinity();
  if (!std::isinf(h_hi)) return h_hi > h_lo ? finite.integrate(f, h_lo, h_hi) : 0.0;
  const double pivot = std::max(h_lo, 1.0 / p.alpha());
  return (pivot > h_lo ? finite.integrate(f, h_lo, pivot) : 0.0) + tail.integrate(f, pivot, inf);
}

}  // namespace

TEST(Retention, KnownValueAtInverseAlpha) {
  const auto p = params(4.0);
  EXPECT_NEAR(effective_saturation(1.0 / p.alpha(), p), std::pow(2.0, -0.75), 1e-12);
  EXPECT_NEAR(std::pow(2.0, -0.75), 0.594604, 1e-6);
}

TEST(Retention, SaturatedForNonPositiveHead) {
  const auto p = params(2.0);
  EXPECT_EQ(effective_saturation(0.0, p), 1.0);
  EXPECT_EQ(effective_saturation(-5.0, p), 1.0);
  EXPECT_EQ(water_content(-1.0, p), p.theta_s());
}

TEST(Retention, CapillaryHeadInvertsRetention) {
  for (double n : {1.5, 2.0, 4.0, 8.0}) {
    const auto p = params(n);
    for (double s = 0.05; s < 1.0; s += 0.05)
      EXPECT_NEAR(effective_saturation(capillary_head(s, p), p), s, 1e-12) << "n=" << n;
  }
}

TEST(Retention, CapacityMatchesFiniteDifference) {
  for (double n : {1.5, 2.0, 4.0}) {
    const auto p = params(n);
    for (double h : {1.0, 10.0, 52.9, 100.0, 400.0}) {
      const double step = 1e-5 * h;
      const double fd = (water_content(h + step, p) - water_content(h - step, p)) / (2.0 * step);
      EXPECT_NEAR(capillary_capacity(h, p), fd, 1e-6 * std::abs(fd) + 1e-11) << "n=" << n << " h=" << h;
      EXPECT_LE(capillary_capacity(h, p), 0.0);
    }
  }
}

TEST(RelPerm, EndPoints) {
  const auto p = params(3.0);
  EXPECT_EQ(rel_perm_wetting(0.0, p), 0.0);
  EXPECT_NEAR(rel_perm_wetting(1.0, p), 1.0, 1e-15);
  EXPECT_EQ(rel_perm_nonwetting(1.0, p), 0.0);
  EXPECT_NEAR(rel_perm_nonwetting(0.0, p), 1.0, 1e-15);
}

TEST(RelPerm, ClosedFormMatchesHeadSpaceIntegral) {
  for (double n : {1.5, 2.0, 3.0, 4.0}) {
    for (double eta : {0.5, 1.0}) {
      const auto p = params(n, eta);
      const double total = mualem_over_head(0.0, std::numeric_limits<double>::infinity(), p);
      for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double h = capillary_head(s, p);
        const double wet = mualem_over_head(h, std::numeric_limits<double>::infinity(), p) / total;
        const double dry = mualem_over_head(0.0, h, p) / total;
        EXPECT_NEAR(rel_perm_wetting(s, p), std::pow(s, eta) * wet * wet, 1e-7) << n << " " << s;
        EXPECT_NEAR(rel_perm_nonwetting(s, p), std::pow(1.0 - s, eta) * dry * dry, 1e-7) << n << " " << s;
      }
    }
  }
}

TEST(RelPerm, ClosedFormMatchesLibraryQuadrature) {
  for (double n : {1.5, 2.0, 3.0, 4.0})
    for (double eta : {0.5, 1.0})
      for (double s = 0.05; s < 0.951; s += 0.05) {
        const auto p = params(n, eta);
        EXPECT_NEAR(rel_perm_wetting(s, p), mualem_quadrature_wetting(s, p),
                    1e-5 * rel_perm_wetting(s, p));
        EXPECT_NEAR(rel_perm_nonwetting(s, p), mualem_quadrature_nonwetting(s, p),
                    1e-5 * rel_perm_nonwetting(s, p));
      }
}

TEST(RelPerm, MonotoneOnRandomSamples) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> n_d(1.1, 8.0), eta_d(0.0, 2.0), s_d(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const auto p = params(n_d(rng), eta_d(rng));
    double a = s_d(rng), b = s_d(rng);
    if (a > b) std::swap(a, b);
    EXPECT_LE(rel_perm_wetting(a, p), rel_perm_wetting(b, p));
    EXPECT_GE(rel_perm_nonwetting(a, p), rel_perm_nonwetting(b, p));
    EXPECT_GE(effective_saturation(1.0 / p.alpha() * a, p), effective_saturation(1.0 / p.alpha() * b, p));
  }
}

TEST(Params, Validation) {
  EXPECT_THROW(VanGenuchtenParams(0.0, 2.0, 0.5, 0.0, 0.3), ValidationError);
  EXPECT_THROW(VanGenuchtenParams(0.01, 1.0, 0.5, 0.0, 0.3), ValidationError);
  EXPECT_THROW(VanGenuchtenParams(0.01, 2.0, 0.5, 0.4, 0.3), ValidationError);
}

TEST(AirDensity, LinearInHead) {
  const FluidProps f;
  EXPECT_DOUBLE_EQ(air_density(0.0, f), f.rho_0_nw);
  EXPECT_DOUBLE_EQ(air_density(10.0, f), f.rho_0_nw + 10.0 * f.lambda);
  EXPECT_THROW(air_density(-2.0 * f.h0_nw(), f), DomainError);
}
