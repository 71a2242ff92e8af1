#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "unsatnet/netbuilder.hpp"

using namespace unsatnet;

namespace {

ProfileSet random_profiles(std::size_t N, std::size_t L, std::uint64_t seed, double t = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ProfileSet ps{"f", t, Matrix<double>(N, L), std::vector<double>(N)};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < L; ++k) ps.values(i, k) = nd(rng);
  return ps;
}

std::vector<double> row(const ProfileSet& ps, std::size_t i) {
  auto r = ps.profile(i);
  return {r.begin(), r.end()};
}

// Textbook two-pass Pearson coefficient in long double.
double pearson_two_pass(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= a.size();
  mb /= b.size();
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

}  // namespace

TEST(PValue, KnownValue) {
  EXPECT_NEAR(p_value(0.5, 20), oracle::t_two_sided_quadrature(0.5 * std::sqrt(18.0 / 0.75), 18.0), 1e-10);
  EXPECT_NEAR(p_value(0.5, 20), 0.0248, 1e-4);
  EXPECT_EQ(p_value(1.0, 10), 0.0);
  EXPECT_NEAR(p_value(0.0, 10), 1.0, 1e-15);
}

TEST(PValue, MatchesQuadratureOverRange) {
  for (std::size_t L : {5u, 20u, 96u})
    for (double c = -0.95; c < 0.96; c += 0.1) {
      const double dof = static_cast<double>(L - 2);
      const double t = c * std::sqrt(dof / (1 - c * c));
      EXPECT_NEAR(p_value(c, L), oracle::t_two_sided_quadrature(t, dof), 1e-9) << c << " " << L;
    }
}

TEST(Correlation, MatchesTwoPass) {
  const auto ps = random_profiles(10, 50, 3);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      EXPECT_NEAR(correlation(ps.profile(i), ps.profile(j)), pearson_two_pass(row(ps, i), row(ps, j)), 1e-13);
  const std::vector<double> flat(50, 2.0);
  EXPECT_THROW(correlation(flat, ps.profile(0)), ZeroVarianceError);
}

TEST(Correlation, AffineInvariance) {
  auto ps = random_profiles(2, 40, 4);
  const double c0 = correlation(ps.profile(0), ps.profile(1));
  for (std::size_t k = 0; k < 40; ++k) ps.values(1, k) = 3.0 * ps.values(1, k) + 7.0;
  EXPECT_NEAR(correlation(ps.profile(0), ps.profile(1)), c0, 1e-14);
}

TEST(Euclidean, MatchesCompensatedSum) {
  const auto ps = random_profiles(6, 1000, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      EXPECT_NEAR(euclidean(ps.profile(i), ps.profile(j)),
                  oracle::euclidean_compensated(row(ps, i), row(ps, j)), 1e-12);
}

TEST(CorrelationNetwork, MatchesBruteForce) {
  const auto ps = random_profiles(30, 20, 6);
  const auto g = build_correlation_network(ps, 0.1);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(g.adjacency(i, i), 0);
    for (std::size_t j = 0; j < 30; ++j) {
      if (i == j) continue;
      const bool expect = p_value(pearson_two_pass(row(ps, i), row(ps, j)), 20) <= 0.1;
      EXPECT_EQ(g.has_edge(i, j), expect);
    }
  }
}

TEST(CorrelationNetwork, ConstantProfileIsolated) {
  auto ps = random_profiles(5, 20, 7);
  for (std::size_t k = 0; k < 20; ++k) ps.values(2, k) = 1.0;
  const auto g = build_correlation_network(ps, 0.99);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_FALSE(g.has_edge(2, j));
}

TEST(CorrelationNetwork, MonotoneInXi) {
  const auto ps = random_profiles(40, 30, 8);
  std::size_t prev = 0;
  for (double xi : {0.01, 0.05, 0.1, 0.3, 0.6}) {
    const auto g = build_correlation_network(ps, xi);
    EXPECT_GE(g.edge_count(), prev);
    prev = g.edge_count();
  }
}

TEST(EuclideanNetwork, MatchesBruteForceAndShiftInvariant) {
  auto ps = random_profiles(25, 15, 9);
  const auto g = build_euclidean_network(ps, 0.7);
  double d_max = 0;
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t j = 0; j < 25; ++j)
      d_max = std::max(d_max, oracle::euclidean_compensated(row(ps, i), row(ps, j)));
  EXPECT_NEAR(g.d_max, d_max, 1e-12);
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t j = i + 1; j < 25; ++j)
      EXPECT_EQ(g.has_edge(i, j), euclidean(ps.profile(i), ps.profile(j)) >= 0.7 * g.d_max);
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t k = 0; k < 15; ++k) ps.values(i, k) += 0.25;
  EXPECT_EQ(build_euclidean_network(ps, 0.7).adjacency, g.adjacency);
}

TEST(EuclideanNetwork, MonotoneInFraction) {
  const auto ps = random_profiles(40, 10, 10);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double f : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto g = build_euclidean_network(ps, f);
    EXPECT_LE(g.edge_count(), prev);
    prev = g.edge_count();
  }
  EXPECT_GE(prev, 1u);  // the farthest pair always survives fraction 1
}

TEST(EuclideanNetwork, TwoClustersGiveCompleteBipartite) {
  ProfileSet ps{"f", 0.0, Matrix<double>(8, 5, 0.0), std::vector<double>(8)};
  for (std::size_t i = 4; i < 8; ++i)
    for (std::size_t k = 0; k < 5; ++k) ps.values(i, k) = 1.0;
  ps.values(0, 0) = 0.01;  // tiny within-cluster spread
  const auto g = build_euclidean_network(ps, 0.7);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      if (i != j) EXPECT_EQ(g.has_edge(i, j), (i < 4) != (j < 4));
}

TEST(EuclideanNetwork, IdenticalProfilesDegenerate) {
  ProfileSet ps{"f", 0.0, Matrix<double>(4, 5, 1.0), std::vector<double>(4)};
  const auto g = build_euclidean_network(ps, 0.7);
  EXPECT_TRUE(g.degenerate);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(TemporalBlocks, DiagonalMatchesSpatialGraphs) {
  std::vector<ProfileSet> sets;
  for (int r = 0; r < 4; ++r) sets.push_back(random_profiles(12, 10, 20 + r, 0.1 * (r + 1)));
  const ThresholdSpec th{Metric::kEuclidean, 0.05, 0.7, {}};
  const auto B = temporal_blocks(sets, th);
  EXPECT_NEAR(B.delta_t, 0.1, 1e-12);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto spatial = build_euclidean_network(sets[r], 0.7).adjacency;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j)
        if (i != j) EXPECT_EQ((*B.block(0, r))(i, j), spatial(i, j));
  }
  EXPECT_TRUE(B.block(3, 0).has_value());
  EXPECT_FALSE(B.block(3, 1).has_value());
  EXPECT_EQ(*B.block(2, 1), cross_block(sets[1], sets[3], th));
  sets[2].t = 0.35;
  EXPECT_THROW(temporal_blocks(sets, th), ValidationError);
}
