#pragma once

// Similarity networks over profile sets: Pearson correlation gated by its
// two-sided p-value, and Euclidean dissimilarity gated at a fraction of the
// largest pairwise distance. Also the cross-time block matrices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unsatnet/error.hpp"
#include "unsatnet/grid.hpp"
#include "unsatnet/profiler.hpp"
#include "unsatnet/special.hpp"

namespace unsatnet {

enum class Metric { kCorrelationPValue, kEuclidean };

inline const char* metric_name(Metric m) {
  return m == Metric::kCorrelationPValue ? "correlation_pvalue" : "euclidean";
}

/// Edge rule parameters: p <= xi for correlation, d >= fraction * d_max for
/// Euclidean.
struct ThresholdSpec {
  Metric metric = Metric::kCorrelationPValue;
  double xi = 0.05;
  double fraction = 0.7;
  /// Euclidean only. When set, d_max is this value instead of the per-set max.
  std::optional<double> global_d_max;
};

using Adjacency = Matrix<std::uint8_t>;

struct SimilarityGraph {
  Adjacency adjacency;
  ThresholdSpec threshold;
  double t = 0.0;
  std::string field_name;
  std::size_t L = 0;
  double d_max = 0.0;      // Euclidean only
  bool degenerate = false;  // Euclidean with d_max == 0

  std::size_t N() const noexcept { return adjacency.rows(); }
  bool has_edge(std::size_t i, std::size_t j) const { return adjacency(i, j) != 0; }
  std::size_t edge_count() const {
    std::size_t e = 0;
    for (std::size_t i = 0; i < N(); ++i)
      for (std::size_t j = i + 1; j < N(); ++j) e += adjacency(i, j);
    return e;
  }
};

/// Thrown by correlation() when a profile is constant.
class ZeroVarianceError : public DomainError {
 public:
  ZeroVarianceError() : DomainError("correlation undefined for zero-variance profile") {}
};

/// Pearson coefficient.
inline double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("profiles", "length mismatch");
  if (a.size() < 3) throw ValidationError("profiles", "need L >= 3");
  const double L = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= L;
  mb /= L;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - ma, db = b[k] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw ZeroVarianceError();
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

/// Two-sided p-value of a Pearson coefficient over L samples, from the
/// t statistic with L - 2 degrees of freedom.
inline double p_value(double c, std::size_t L) {
  if (L < 3) throw ValidationError("L", "need L >= 3");
  if (!(std::abs(c) <= 1.0)) throw DomainError("|C| must be <= 1");
  const double dof = static_cast<double>(L - 2);
  if (std::abs(c) == 1.0) return 0.0;
  const double t = c * std::sqrt(dof / (1.0 - c * c));
  return student_t_two_sided(t, dof);
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("profiles", "length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace detail {

inline bool has_variance(std::span<const double> v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; });
}

inline bool correlation_edge(std::span<const double> a, std::span<const double> b,
                             double xi) {
  if (!has_variance(a) || !has_variance(b)) return false;
  return p_value(correlation(a, b), a.size()) <= xi;
}

}  // namespace detail

inline SimilarityGraph build_correlation_network(const ProfileSet& profiles,
                                                 double xi = 0.05) {
  if (!(xi > 0.0 && xi < 1.0)) throw ValidationError("xi", "must lie in (0, 1)");
  if (profiles.N() < 2 || profiles.L() < 3)
    throw ValidationError("profiles", "need N >= 2 and L >= 3");
  const std::size_t N = profiles.N();
  SimilarityGraph g{Adjacency(N, N, 0), {Metric::kCorrelationPValue, xi, 0.7, {}},
                    profiles.t, profiles.field_name, profiles.L()};
  std::vector<bool> variable(N);
  for (std::size_t i = 0; i < N; ++i) variable[i] = detail::has_variance(profiles.profile(i));
  for (std::size_t i = 0; i < N; ++i) {
    if (!variable[i]) continue;
    for (std::size_t j = i + 1; j < N; ++j) {
      if (!variable[j]) continue;
      const double c = correlation(profiles.profile(i), profiles.profile(j));
      if (p_value(c, profiles.L()) <= xi) g.adjacency(i, j) = g.adjacency(j, i) = 1;
    }
  }
  return g;
}

/// Largest pairwise distance within one profile set.
inline double max_pairwise_distance(const ProfileSet& profiles) {
  double d_max = 0.0;
  for (std::size_t i = 0; i < profiles.N(); ++i)
    for (std::size_t j = i + 1; j < profiles.N(); ++j)
      d_max = std::max(d_max, euclidean(profiles.profile(i), profiles.profile(j)));
  return d_max;
}

/// Edges join dissimilar profiles: d_ij >= fraction * d_max. When every
/// profile is identical (d_max == 0) the graph is empty and flagged degenerate.
inline SimilarityGraph build_euclidean_network(const ProfileSet& profiles,
                                               double fraction = 0.7,
                                               std::optional<double> global_d_max = {}) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError("fraction", "must lie in (0, 1]");
  if (profiles.N() < 2) throw ValidationError("profiles", "need N >= 2");
  const std::size_t N = profiles.N();
  SimilarityGraph g{Adjacency(N, N, 0), {Metric::kEuclidean, 0.05, fraction, global_d_max},
                    profiles.t, profiles.field_name, profiles.L()};
  std::vector<double> dist(N * N, 0.0);
  double d_max = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      const double d = euclidean(profiles.profile(i), profiles.profile(j));
      dist[i * N + j] = d;
      d_max = std::max(d_max, d);
    }
  }
  if (global_d_max) d_max = *global_d_max;
  g.d_max = d_max;
  if (d_max == 0.0) {
    g.degenerate = true;
    return g;
  }
  const double cut = fraction * d_max;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      if (dist[i * N + j] >= cut) g.adjacency(i, j) = g.adjacency(j, i) = 1;
  return g;
}

/// Cross-time adjacency blocks. block(k, r) relates profiles at reference time
/// t_r (rows) to profiles at t_r + k*dt (columns); absent when t_r + k*dt is
/// beyond the last time. Row k = 0 holds the spatial graphs, diagonal entries
/// included as computed.
struct TemporalBlockMatrix {
  std::size_t n = 0;
  double delta_t = 0.0;
  std::vector<double> times;
  ThresholdSpec threshold;
  std::vector<std::optional<Adjacency>> blocks;  // n x n, row-major in (k, r)

  const std::optional<Adjacency>& block(std::size_t k, std::size_t r) const {
    return blocks[k * n + r];
  }
};

inline Adjacency cross_block(const ProfileSet& a, const ProfileSet& b,
                             const ThresholdSpec& th) {
  if (a.N() != b.N() || a.L() != b.L())
    throw ValidationError("profiles", "shape mismatch across times");
  const std::size_t N = a.N();
  Adjacency m(N, N, 0);
  if (th.metric == Metric::kCorrelationPValue) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        m(i, j) = detail::correlation_edge(a.profile(i), b.profile(j), th.xi) ? 1 : 0;
    return m;
  }
  std::vector<double> dist(N * N);
  double d_max = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      dist[i * N + j] = euclidean(a.profile(i), b.profile(j));
      d_max = std::max(d_max, dist[i * N + j]);
    }
  }
  if (th.global_d_max) d_max = *th.global_d_max;
  if (d_max == 0.0) return m;
  for (std::size_t idx = 0; idx < N * N; ++idx)
    m(idx / N, idx % N) = dist[idx] >= th.fraction * d_max ? 1 : 0;
  return m;
}

inline TemporalBlockMatrix temporal_blocks(const std::vector<ProfileSet>& sets,
                                           const ThresholdSpec& th) {
  if (sets.size() < 2) throw ValidationError("times", "need at least 2 snapshot times");
  const double dt = sets[1].t - sets[0].t;
  if (!(dt > 0.0)) throw ValidationError("times", "must be strictly increasing");
  for (std::size_t r = 1; r < sets.size(); ++r) {
    const double step = sets[r].t - sets[r - 1].t;
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw ValidationError("times", "nonuniform time step");
  }
  TemporalBlockMatrix B;
  B.n = sets.size();
  B.delta_t = dt;
  B.threshold = th;
  for (const auto& s : sets) B.times.push_back(s.t);
  B.blocks.resize(B.n * B.n);
  for (std::size_t k = 0; k < B.n; ++k)
    for (std::size_t r = 0; r + k < B.n; ++r)
      B.blocks[k * B.n + r] = cross_block(sets[r], sets[r + k], th);
  return B;
}

}  // namespace unsatnet
