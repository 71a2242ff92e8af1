#pragma once

// Degree, local and mean clustering, degree distribution, geodesic distances
// (Dijkstra with unit weights) and Erdos-Renyi baselines for small-world
// comparison.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "unsatnet/error.hpp"
#include "unsatnet/grid.hpp"
#include "unsatnet/netbuilder.hpp"

namespace unsatnet {

/// Undirected simple graph as sorted adjacency lists.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t n) : adj_(n) {}

  static Graph from_adjacency(const Adjacency& a) {
    Graph g(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = i + 1; j < a.cols(); ++j)
        if (a(i, j)) g.add_edge(i, j);
    return g;
  }
  static Graph from(const SimilarityGraph& s) { return from_adjacency(s.adjacency); }

  /// Adds i-j unless it is a self-loop or already present.
  bool add_edge(std::size_t i, std::size_t j) {
    if (i == j || has_edge(i, j)) return false;
    insert_sorted(adj_[i], j);
    insert_sorted(adj_[j], i);
    ++edges_;
    return true;
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    const auto& a = adj_[i];
    return std::binary_search(a.begin(), a.end(), j);
  }

  std::size_t size() const noexcept { return adj_.size(); }
  std::size_t edge_count() const noexcept { return edges_; }
  std::size_t degree(std::size_t i) const { return adj_[i].size(); }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adj_[i]; }

 private:
  static void insert_sorted(std::vector<std::size_t>& v, std::size_t x) {
    v.insert(std::lower_bound(v.begin(), v.end(), x), x);
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::size_t edges_ = 0;
};

struct NodeMetrics {
  std::size_t k = 0;
  double c = 0.0;
};

/// Edges among the neighbours of i over k_i (k_i - 1) / 2; zero when k_i <= 1.
inline double node_clustering(const Graph& g, std::size_t i) {
  const auto& nb = g.neighbors(i);
  const std::size_t k = nb.size();
  if (k <= 1) return 0.0;
  std::size_t links = 0;
  for (std::size_t a = 0; a < k; ++a) {
    // Sorted-list intersection of neighbours of nb[a] with nb[a+1..].
    const auto& other = g.neighbors(nb[a]);
    auto it = std::upper_bound(other.begin(), other.end(), nb[a]);
    auto jt = nb.begin() + static_cast<std::ptrdiff_t>(a + 1);
    while (it != other.end() && jt != nb.end()) {
      if (*it < *jt) {
        ++it;
      } else if (*jt < *it) {
        ++jt;
      } else {
        ++links;
        ++it;
        ++jt;
      }
    }
  }
  return static_cast<double>(links) / (0.5 * static_cast<double>(k) * static_cast<double>(k - 1));
}

/// Mean of c_i over all nodes, isolated ones included.
inline double mean_clustering(const Graph& g) {
  if (g.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += node_clustering(g, i);
  return s / static_cast<double>(g.size());
}

/// P(k) keyed by degree.
inline std::map<std::size_t, double> degree_distribution(const Graph& g) {
  std::map<std::size_t, double> p;
  if (g.size() == 0) return p;
  for (std::size_t i = 0; i < g.size(); ++i) p[g.degree(i)] += 1.0;
  for (auto& [k, v] : p) v /= static_cast<double>(g.size());
  return p;
}

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Dijkstra from `source` with unit edge weights.
inline std::vector<std::size_t> shortest_paths(const Graph& g, std::size_t source) {
  if (source >= g.size()) throw ValidationError("source", "node out of range");
  std::vector<std::size_t> dist(g.size(), kUnreachable);
  using Item = std::pair<std::size_t, std::size_t>;  // (distance, node)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0;
  heap.emplace(0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d != dist[u]) continue;
    for (std::size_t v : g.neighbors(u)) {
      if (d + 1 < dist[v]) {
        dist[v] = d + 1;
        heap.emplace(d + 1, v);
      }
    }
  }
  return dist;
}

struct PathLengthResult {
  double mean = 0.0;
  std::size_t connected_pairs = 0;
  std::size_t total_pairs = 0;

  double connected_fraction() const {
    return total_pairs ? static_cast<double>(connected_pairs) / static_cast<double>(total_pairs)
                       : 0.0;
  }
};

/// Mean geodesic distance over connected pairs only; the fraction of pairs
/// that are connected is reported alongside.
inline PathLengthResult avg_path_length(const Graph& g) {
  const std::size_t N = g.size();
  if (N < 2) throw ValidationError("graph", "need N >= 2");
  PathLengthResult r;
  r.total_pairs = N * (N - 1) / 2;
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto dist = shortest_paths(g, i);
    for (std::size_t j = i + 1; j < N; ++j) {
      if (dist[j] == kUnreachable) continue;
      sum += static_cast<double>(dist[j]);
      ++r.connected_pairs;
    }
  }
  if (r.connected_pairs == 0) throw DomainError("avg_path_length: no connected pairs");
  r.mean = sum / static_cast<double>(r.connected_pairs);
  return r;
}

inline std::size_t num_components(const Graph& g) {
  std::vector<bool> seen(g.size(), false);
  std::size_t count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (seen[s]) continue;
    ++count;
    seen[s] = true;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : g.neighbors(u))
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
    }
  }
  return count;
}

/// G(N, p) random graph. Uses its own uniform mapping so the sequence is
/// identical on every standard library.
inline Graph erdos_renyi(std::size_t N, double p, std::uint64_t seed) {
  Graph g(N);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u < p) g.add_edge(i, j);
    }
  return g;
}

struct SmallWorldIndices {
  double C = 0.0, C_rand = 0.0;
  double L = 0.0, L_rand = 0.0;
  double c_ratio = 0.0;  // C / C_rand
  double l_ratio = 0.0;  // L / L_rand
  double sigma = 0.0;
};

/// Compares C and L with the average over `replicates` Erdos-Renyi graphs of
/// matched N and edge probability 2E / (N (N - 1)).
inline SmallWorldIndices small_world_indices(const Graph& g, std::uint64_t seed,
                                             int replicates = 20) {
  const std::size_t N = g.size();
  if (g.edge_count() == 0) throw DomainError("small_world_indices: graph has no edges");
  SmallWorldIndices s;
  s.C = mean_clustering(g);
  s.L = avg_path_length(g).mean;
  const double p = 2.0 * static_cast<double>(g.edge_count()) /
                   (static_cast<double>(N) * static_cast<double>(N - 1));
  int used = 0;
  for (int r = 0; r < replicates; ++r) {
    const Graph er = erdos_renyi(N, p, seed + static_cast<std::uint64_t>(r) * 0x9e3779b97f4a7c15ULL);
    if (er.edge_count() == 0) continue;
    s.C_rand += mean_clustering(er);
    s.L_rand += avg_path_length(er).mean;
    ++used;
  }
  if (used == 0) throw DomainError("small_world_indices: all random baselines empty");
  s.C_rand /= used;
  s.L_rand /= used;
  s.c_ratio = s.C_rand > 0.0 ? s.C / s.C_rand : (s.C > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  s.l_ratio = s.L / s.L_rand;
  s.sigma = s.c_ratio / s.l_ratio;
  return s;
}

/// (k_i, c_i) per node, in node order.
inline std::vector<NodeMetrics> kc_state_space(const Graph& g) {
  std::vector<NodeMetrics> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = {g.degree(i), node_clustering(g, i)};
  return out;
}

struct GraphSummary {
  std::size_t N = 0;
  std::size_t E = 0;
  double mean_degree = 0.0;
  double mean_clustering = 0.0;
  std::optional<PathLengthResult> path;  // absent for edgeless graphs
  std::map<std::size_t, double> degree_histogram;
  std::size_t num_components = 0;
  std::vector<NodeMetrics> node_metrics;
};

inline GraphSummary summarize(const Graph& g) {
  GraphSummary s;
  s.N = g.size();
  s.E = g.edge_count();
  s.mean_degree = s.N ? 2.0 * static_cast<double>(s.E) / static_cast<double>(s.N) : 0.0;
  s.node_metrics = kc_state_space(g);
  double csum = 0.0;
  for (const auto& nm : s.node_metrics) csum += nm.c;
  s.mean_clustering = s.N ? csum / static_cast<double>(s.N) : 0.0;
  if (s.E > 0) s.path = avg_path_length(g);
  s.degree_histogram = degree_distribution(g);
  s.num_components = num_components(g);
  return s;
}

}  // namespace unsatnet
