#pragma once

// The four pipeline stages. Each stage reads its inputs from the run
// directory written by the previous one, so stages can be run separately or
// composed; both paths execute the same code and produce the same files.
//
// Run directory layout:
//   meta/config.cfg, meta/run_meta.csv        simulate
//   fields/<param>.csv                         simulate
//   snapshots/snap_t<t>_<field>.csv            simulate
//   profiles/<field>_t<t>.csv                  networks
//   networks/<field>_<metric>_t<t>_{edges,adj}.csv
//   networks/blocks_<field>_<metric>/B_k<k>_t<t>.csv  (optional)
//   metrics/summary.csv, metrics/{degree,kc}_<field>_<metric>_t<t>.csv
//   fits/fits.csv

#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "unsatnet/config.hpp"
#include "unsatnet/error.hpp"
#include "unsatnet/fitlab.hpp"
#include "unsatnet/graphmetrics.hpp"
#include "unsatnet/hetfield.hpp"
#include "unsatnet/io.hpp"
#include "unsatnet/netbuilder.hpp"
#include "unsatnet/profiler.hpp"
#include "unsatnet/solver.hpp"

namespace unsatnet {

namespace fs = std::filesystem;

/// Error raised by a stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct StageContext {
  RunConfig config;
  fs::path out;
  bool force = false;
  std::ostream* log = nullptr;

  std::string hash() const { return config_hash(config); }
  void note(const std::string& s) const {
    if (log) *log << s << '\n';
  }
};

/// Advisory lock: a `.lock` file created exclusively in the run directory.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw IoError("run directory is locked by another process: " + path_.string());
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

namespace detail {

inline fs::path prepare_dir(const StageContext& ctx, const std::string& sub) {
  const fs::path dir = ctx.out / sub;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!ctx.force) throw IoError("output exists: " + dir.string() + " (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

inline std::string snapshot_file(double t, const std::string& field) {
  return "snap_t" + fmt_short(t) + "_" + field + ".csv";
}

inline void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw IoError("missing input file: " + p.string());
}

}  // namespace detail

/// One graph produced by the networks stage.
struct GraphKey {
  std::string field;
  Metric metric;
  double t;

  std::string tag() const { return field + "_" + metric_name(metric) + "_t" + fmt_short(t); }
};

/// Saturation graphs under both metrics, then the velocity series.
inline std::vector<GraphKey> graph_catalog(const RunConfig& c) {
  std::vector<GraphKey> keys;
  for (Metric m : {Metric::kCorrelationPValue, Metric::kEuclidean})
    for (double t : c.snapshot_times) keys.push_back({"S_nw", m, t});
  for (double t : c.snapshot_times) keys.push_back({"v_nw_abs", c.network.velocity_metric, t});
  return keys;
}

// ---------------------------------------------------------------------------

inline void cmd_simulate(const StageContext& ctx) {
  const RunConfig& c = ctx.config;
  c.validate();
  const std::string hash = ctx.hash();
  const fs::path meta = detail::prepare_dir(ctx, "meta");
  const fs::path fields = detail::prepare_dir(ctx, "fields");
  const fs::path snaps = detail::prepare_dir(ctx, "snapshots");

  const ParameterField field =
      sample_field(c.geometry.nx, c.geometry.ny, c.field, c.seed, c.soil.theta_r);
  const std::vector<std::string> gen{"generator=" + std::string(kFieldGeneratorName),
                                     "seed=" + std::to_string(c.seed)};
  write_text(fields / "theta_s.csv", file_header(hash, gen) + grid_csv(field.theta_s));
  write_text(fields / "k_intrinsic.csv", file_header(hash, gen) + grid_csv(field.k_intrinsic));
  write_text(fields / "n_vg.csv", file_header(hash, gen) + grid_csv(field.n_vg));

  ColumnModel model(c.geometry, field, c.soil, c.fluids, c.schedule, c.solver);
  ctx.note("simulate: " + std::to_string(c.geometry.nx) + "x" + std::to_string(c.geometry.ny) +
           " grid, " + std::to_string(c.snapshot_times.size()) + " snapshot times");
  const SimulationResult res = run_simulation(model, c.snapshot_times, c.initial_air_head);

  for (const Snapshot& s : res.snapshots) {
    const std::vector<std::string> info{"t=" + fmt(s.t), "nx=" + std::to_string(c.geometry.nx),
                                        "ny=" + std::to_string(c.geometry.ny),
                                        "rows run bottom (y=0) to top"};
    auto put = [&](const std::string& name, const ScalarGrid& g) {
      auto lines = info;
      lines.insert(lines.begin(), "field=" + name);
      write_text(snaps / detail::snapshot_file(s.t, name), file_header(hash, lines) + grid_csv(g));
    };
    put("S_nw", s.S_nw);
    put("v_nw_abs", s.v_nw_abs);
    put("h_nw", s.h_nw);
    put("h_w", s.h_w);
  }

  const RunStats& st = res.stats;
  std::string m = file_header(hash) + "key,value\n";
  m += "seed," + std::to_string(c.seed) + "\n";
  m += "field_generator," + std::string(kFieldGeneratorName) + "\n";
  m += "accepted_steps," + std::to_string(st.accepted_steps) + "\n";
  m += "rejected_steps," + std::to_string(st.rejected_steps) + "\n";
  m += "picard_iterations," + std::to_string(st.picard_iterations) + "\n";
  m += "dt_min_used," + fmt(st.dt_min_used) + "\n";
  m += "dt_max_used," + fmt(st.dt_max_used) + "\n";
  m += "max_water_residual_ratio," + fmt(st.max_water_residual_ratio) + "\n";
  m += "max_air_residual_ratio," + fmt(st.max_air_residual_ratio) + "\n";
  m += "net_water_in," + fmt(st.cumulative.water_volume) + "\n";
  m += "net_air_mass_in," + fmt(st.cumulative.air_mass) + "\n";
  write_text(meta / "run_meta.csv", m);
  write_text(meta / "config.cfg", serialize_config(c));
  ctx.note("simulate: " + std::to_string(st.accepted_steps) + " steps, " +
           std::to_string(st.rejected_steps) + " rejected, max water residual ratio " +
           fmt_short(st.max_water_residual_ratio));
}

// ---------------------------------------------------------------------------

namespace detail {

inline ProfileSet load_profiles(const StageContext& ctx, const std::string& field, double t,
                                std::size_t X, std::size_t Y) {
  const fs::path p = ctx.out / "snapshots" / snapshot_file(t, field);
  require_file(p);
  const ScalarGrid g = read_grid_csv(p);
  const GridGeometry& geom = ctx.config.geometry;
  if (g.nx() != geom.nx || g.ny() != geom.ny)
    throw ValidationError("snapshots", "grid in " + p.string() + " does not match the config");
  return extract_profiles(resample(g, geom, X, Y, upper_region(geom)), field, t);
}

inline std::string profiles_csv(const ProfileSet& ps, const std::string& hash) {
  std::string s = file_header(hash, {"field=" + ps.field_name, "t=" + fmt(ps.t),
                                     "N=" + std::to_string(ps.N()), "L=" + std::to_string(ps.L()),
                                     "one row per node: x then L samples bottom to top"});
  for (std::size_t i = 0; i < ps.N(); ++i) {
    s += fmt(ps.x_positions[i]);
    for (double v : ps.profile(i)) s += "," + fmt(v);
    s += '\n';
  }
  return s;
}

inline std::vector<std::string> graph_info(const SimilarityGraph& g) {
  std::vector<std::string> info{"metric=" + std::string(metric_name(g.threshold.metric)),
                                "field=" + g.field_name, "t=" + fmt(g.t),
                                "N=" + std::to_string(g.N()), "L=" + std::to_string(g.L)};
  if (g.threshold.metric == Metric::kCorrelationPValue) {
    info.push_back("threshold=p<=" + fmt(g.threshold.xi));
  } else {
    info.push_back("threshold=d>=" + fmt(g.threshold.fraction) + "*d_max");
    info.push_back("d_max=" + fmt(g.d_max));
    if (g.degenerate) info.push_back("degenerate=all profiles identical");
  }
  return info;
}

inline std::string dense_csv(const Adjacency& a) {
  std::string s;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (j) s += ',';
      s += a(i, j) ? '1' : '0';
    }
    s += '\n';
  }
  return s;
}

inline Adjacency read_dense(const fs::path& p) {
  const CsvTable t = read_csv(p, false);
  const std::size_t n = t.rows.size();
  Adjacency a(n, n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (t.rows[i].size() != n) throw IoError("adjacency is not square: " + p.string());
    for (std::size_t j = 0; j < n; ++j) {
      const auto& cell = t.rows[i][j];
      if (cell != "0" && cell != "1") throw IoError("adjacency entry not 0/1 in " + p.string());
      a(i, j) = cell == "1" ? 1 : 0;
    }
  }
  return a;
}

inline void write_graph(const fs::path& dir, const std::string& tag, const SimilarityGraph& g,
                        const std::string& hash) {
  const auto info = graph_info(g);
  std::string edges = file_header(hash, info) + "i,j\n";
  for (std::size_t i = 0; i < g.N(); ++i)
    for (std::size_t j = i + 1; j < g.N(); ++j)
      if (g.has_edge(i, j)) edges += std::to_string(i) + "," + std::to_string(j) + "\n";
  write_text(dir / (tag + "_edges.csv"), edges);
  write_text(dir / (tag + "_adj.csv"), file_header(hash, info) + dense_csv(g.adjacency));
}

}  // namespace detail

inline void cmd_networks(const StageContext& ctx) {
  const RunConfig& c = ctx.config;
  c.validate();
  const std::string hash = ctx.hash();
  for (double t : c.snapshot_times) {
    detail::require_file(ctx.out / "snapshots" / detail::snapshot_file(t, "S_nw"));
    detail::require_file(ctx.out / "snapshots" / detail::snapshot_file(t, "v_nw_abs"));
  }
  const fs::path prof_dir = detail::prepare_dir(ctx, "profiles");
  const fs::path net_dir = detail::prepare_dir(ctx, "networks");

  struct Series {
    std::string field;
    std::size_t X, Y;
    std::vector<Metric> metrics;
  };
  const std::vector<Series> series{
      {"S_nw", c.network.lattice_x, c.network.lattice_y,
       {Metric::kCorrelationPValue, Metric::kEuclidean}},
      {"v_nw_abs", c.network.velocity_lattice_x, c.network.velocity_lattice_y,
       {c.network.velocity_metric}}};

  std::size_t graphs = 0;
  for (const auto& s : series) {
    std::vector<ProfileSet> sets;
    for (double t : c.snapshot_times) {
      sets.push_back(detail::load_profiles(ctx, s.field, t, s.X, s.Y));
      write_text(prof_dir / (s.field + "_t" + fmt_short(t) + ".csv"),
                 detail::profiles_csv(sets.back(), hash));
    }
    std::optional<double> global;
    if (c.network.global_d_max) {
      double d = 0.0;
      for (const auto& ps : sets) d = std::max(d, max_pairwise_distance(ps));
      global = d;
    }
    for (Metric m : s.metrics) {
      for (const auto& ps : sets) {
        const SimilarityGraph g = m == Metric::kCorrelationPValue
                                      ? build_correlation_network(ps, c.network.xi)
                                      : build_euclidean_network(ps, c.network.fraction, global);
        detail::write_graph(net_dir, GraphKey{s.field, m, ps.t}.tag(), g, hash);
        ++graphs;
      }
      if (c.network.temporal_blocks) {
        ThresholdSpec th{m, c.network.xi, c.network.fraction, global};
        const TemporalBlockMatrix B = temporal_blocks(sets, th);
        const fs::path bdir = net_dir / ("blocks_" + s.field + "_" + metric_name(m));
        fs::create_directories(bdir);
        for (std::size_t k = 0; k < B.n; ++k)
          for (std::size_t r = 0; r + k < B.n; ++r)
            write_text(bdir / ("B_k" + std::to_string(k) + "_t" + fmt_short(B.times[r]) + ".csv"),
                       file_header(hash, {"metric=" + std::string(metric_name(m)),
                                          "t_ref=" + fmt(B.times[r]),
                                          "t_cols=" + fmt(B.times[r + k]),
                                          "delta_t=" + fmt(B.delta_t)}) +
                           detail::dense_csv(*B.block(k, r)));
      }
    }
  }
  ctx.note("networks: wrote " + std::to_string(graphs) + " graphs");
}

// ---------------------------------------------------------------------------

inline constexpr const char* kSummaryColumns =
    "field,metric,t,N,E,mean_degree,C,L_path,connected_fraction,components,"
    "C_rand,L_rand,c_ratio,l_ratio,sigma";

inline void cmd_metrics(const StageContext& ctx) {
  const RunConfig& c = ctx.config;
  c.validate();
  const std::string hash = ctx.hash();
  const auto keys = graph_catalog(c);
  for (const auto& k : keys) detail::require_file(ctx.out / "networks" / (k.tag() + "_adj.csv"));
  const fs::path dir = detail::prepare_dir(ctx, "metrics");

  std::string summary = file_header(hash, {"L_path over connected pairs only",
                                           "random baselines: " +
                                               std::to_string(c.fit.baseline_replicates) +
                                               " G(N,p) graphs, seed " +
                                               std::to_string(c.fit.baseline_seed)}) +
                        kSummaryColumns + "\n";
  for (const auto& k : keys) {
    const Graph g = Graph::from_adjacency(detail::read_dense(ctx.out / "networks" / (k.tag() + "_adj.csv")));
    const GraphSummary s = summarize(g);
    summary += k.field + "," + metric_name(k.metric) + "," + fmt(k.t) + "," + std::to_string(s.N) +
               "," + std::to_string(s.E) + "," + fmt(s.mean_degree) + "," + fmt(s.mean_clustering) + ",";
    if (s.path) {
      summary += fmt(s.path->mean) + "," + fmt(s.path->connected_fraction());
    } else {
      summary += ",0";
    }
    summary += "," + std::to_string(s.num_components) + ",";
    bool sw_done = false;
    if (s.path) {
      try {
        const SmallWorldIndices sw = small_world_indices(g, c.fit.baseline_seed, c.fit.baseline_replicates);
        summary += fmt(sw.C_rand) + "," + fmt(sw.L_rand) + "," + fmt(sw.c_ratio) + "," +
                   fmt(sw.l_ratio) + "," + fmt(sw.sigma);
        sw_done = true;
      } catch (const DomainError&) {
      }
    }
    if (!sw_done) summary += ",,,,";
    summary += "\n";

    const auto info = std::vector<std::string>{"graph=" + k.tag()};
    std::string deg = file_header(hash, info) + "k,P\n";
    for (const auto& [kk, p] : s.degree_histogram) deg += std::to_string(kk) + "," + fmt(p) + "\n";
    write_text(dir / ("degree_" + k.tag() + ".csv"), deg);
    std::string kc = file_header(hash, info) + "node,k,c\n";
    for (std::size_t i = 0; i < s.node_metrics.size(); ++i)
      kc += std::to_string(i) + "," + std::to_string(s.node_metrics[i].k) + "," +
            fmt(s.node_metrics[i].c) + "\n";
    write_text(dir / ("kc_" + k.tag() + ".csv"), kc);
  }
  write_text(dir / "summary.csv", summary);
  ctx.note("metrics: summarised " + std::to_string(keys.size()) + " graphs");
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<NodeMetrics> read_kc(const fs::path& p) {
  require_file(p);
  const CsvTable t = read_csv(p, true);
  const std::size_t ck = t.column("k"), cc = t.column("c");
  std::vector<NodeMetrics> out;
  for (const auto& r : t.rows)
    out.push_back({static_cast<std::size_t>(parse_double(r[ck], p.string())),
                   parse_double(r[cc], p.string())});
  return out;
}

/// Air speeds of the cells above the disk at the last snapshot, scaled to [0, 1].
inline std::vector<double> velocity_samples(const StageContext& ctx) {
  const RunConfig& c = ctx.config;
  const fs::path p = ctx.out / "snapshots" / snapshot_file(c.snapshot_times.back(), "v_nw_abs");
  require_file(p);
  const ScalarGrid g = read_grid_csv(p);
  std::vector<double> v;
  for (std::size_t j = c.geometry.disk_rows(); j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nx(); ++i) v.push_back(g(i, j));
  return normalize_unit_interval(v);
}

}  // namespace detail

inline constexpr const char* kFitColumns = "family,parameters,residual_norm,converged,samples";

inline void cmd_fit(const StageContext& ctx) {
  const RunConfig& c = ctx.config;
  c.validate();
  const std::string hash = ctx.hash();
  const fs::path summary_path = ctx.out / "metrics" / "summary.csv";
  detail::require_file(summary_path);
  const std::vector<double> speeds = detail::velocity_samples(ctx);

  // Mean clustering of the velocity series, straight from the summary.
  const CsvTable summary = read_csv(summary_path, true);
  const std::size_t cf = summary.column("field"), ct = summary.column("t"), cC = summary.column("C");
  std::map<double, double> velocity_C;
  for (const auto& r : summary.rows)
    if (r[cf] == "v_nw_abs") velocity_C[parse_double(r[ct], "summary.csv")] = parse_double(r[cC], "summary.csv");

  std::vector<ClusteringSample> cs;
  std::vector<std::pair<double, double>> kc_pairs;
  for (const auto& k : graph_catalog(c)) {
    const auto nodes = detail::read_kc(ctx.out / "metrics" / ("kc_" + k.tag() + ".csv"));
    if (k.field == "v_nw_abs") {
      ClusteringSample s{k.t, velocity_C.at(k.t), {}};
      for (const auto& n : nodes) s.node_clustering.push_back(n.c);
      cs.push_back(std::move(s));
    } else if (k.metric == Metric::kEuclidean) {
      for (const auto& n : nodes) kc_pairs.emplace_back(static_cast<double>(n.k), n.c);
    }
  }
  const fs::path dir = detail::prepare_dir(ctx, "fits");

  std::string out = file_header(hash, {"truncated_power_law: last-snapshot air speed above the disk",
                                       "kc_power_law: saturation euclidean graphs, all times pooled",
                                       "sigmoid: inverse mean clustering of the velocity graphs",
                                       "a family that cannot be fitted reports error=<reason>"}) +
                    kFitColumns + "\n";
  // Each family is fitted independently; one failure does not hide the others.
  auto attempt = [&](const std::string& family, const std::function<std::string()>& fit) {
    try {
      out += family + "," + fit() + "\n";
    } catch (const Error& e) {
      std::string why = e.what();
      std::replace(why.begin(), why.end(), ',', ';');
      out += family + ",error=" + why + ",,false,0\n";
      ctx.note("fit: " + family + " failed: " + why);
    }
  };
  attempt("truncated_power_law", [&] {
    const TruncatedPowerLawFit f = fit_truncated_power_law(speeds, c.fit.velocity_bins);
    ctx.note("fit: truncated power law beta=" + fmt_short(f.beta) + " kappa=" + fmt_short(f.kappa));
    return "A=" + fmt(f.amplitude) + ";v0=" + fmt(f.v0) + ";beta=" + fmt(f.beta) + ";kappa=" +
           fmt(f.kappa) + "," + fmt(f.residual_norm) + "," + (f.converged ? "true" : "false") + "," +
           std::to_string(f.samples_used);
  });
  attempt("kc_power_law", [&] {
    const PowerLawFit f = fit_kc_power_law(kc_pairs);
    ctx.note("fit: k-c exponent " + fmt_short(f.exponent));
    return "a=" + fmt(f.amplitude) + ";b=" + fmt(f.exponent) + "," + fmt(f.residual_norm) +
           ",true," + std::to_string(f.pairs_used);
  });
  attempt("sigmoid_inverse_clustering", [&] {
    const InverseClusteringSeries inv = inverse_mean_clustering_series(cs, c.fit.inverse_clustering);
    const SigmoidFit f = fit_sigmoid_inverse_clustering(inv.points);
    ctx.note("fit: sigmoid beta=" + fmt_short(f.beta) + " delta=" + fmt_short(f.delta));
    std::string dropped;
    for (double t : inv.dropped_times) dropped += (dropped.empty() ? "" : "|") + fmt_short(t);
    return "scale=" + fmt(f.scale) + ";beta=" + fmt(f.beta) + ";delta=" + fmt(f.delta) +
           ";constant_residual=" + fmt(f.constant_residual_norm) + ";dropped_times=" + dropped + "," +
           fmt(f.residual_norm) + "," + (f.converged ? "true" : "false") + "," +
           std::to_string(inv.points.size());
  });
  write_text(dir / "fits.csv", out);
}

// ---------------------------------------------------------------------------

inline const std::vector<std::pair<std::string, void (*)(const StageContext&)>>& stages() {
  static const std::vector<std::pair<std::string, void (*)(const StageContext&)>> s{
      {"simulate", &cmd_simulate},
      {"networks", &cmd_networks},
      {"metrics", &cmd_metrics},
      {"fit", &cmd_fit}};
  return s;
}

/// Runs one stage under the run-directory lock; failures become StageErrors.
inline void run_stage(const std::string& name, const StageContext& ctx) {
  for (const auto& [stage, fn] : stages()) {
    if (stage != name) continue;
    RunLock lock(ctx.out);
    try {
      fn(ctx);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    return;
  }
  throw ValidationError("command", "unknown stage '" + name + "'");
}

/// simulate -> networks -> metrics -> fit.
inline void cmd_pipeline(const StageContext& ctx) {
  for (const auto& stage : stages()) run_stage(stage.first, ctx);
}

}  // namespace unsatnet
