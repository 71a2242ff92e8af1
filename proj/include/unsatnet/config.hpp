#pragma once

// Run configuration: line-oriented `key = value` under `[section]` headers.
// Every key is registered once in a table that drives parsing, validation
// messages and serialisation, so the two directions cannot drift apart.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "unsatnet/constitutive.hpp"
#include "unsatnet/error.hpp"
#include "unsatnet/fitlab.hpp"
#include "unsatnet/hetfield.hpp"
#include "unsatnet/io.hpp"
#include "unsatnet/netbuilder.hpp"
#include "unsatnet/solver.hpp"

namespace unsatnet {

struct NetworkConfig {
  double xi = 0.05;
  double fraction = 0.7;
  std::size_t lattice_x = 96;
  std::size_t lattice_y = 96;
  std::size_t velocity_lattice_x = 93;
  std::size_t velocity_lattice_y = 96;
  Metric velocity_metric = Metric::kCorrelationPValue;
  bool global_d_max = false;     // one d_max across all times per field
  bool temporal_blocks = false;  // needs uniformly spaced snapshot times

  bool operator==(const NetworkConfig&) const = default;
};

struct FitConfig {
  std::size_t velocity_bins = 30;
  InverseClusteringMode inverse_clustering = InverseClusteringMode::kReciprocalOfMean;
  std::uint64_t baseline_seed = 7;  // Erdos-Renyi baselines
  int baseline_replicates = 20;

  bool operator==(const FitConfig&) const = default;
};

struct RunConfig {
  GridGeometry geometry;
  SoilProps soil;
  FluidProps fluids;
  FieldSpecs field;
  std::uint64_t seed = 42;
  BoundarySchedule schedule;
  double initial_air_head = 20.0;  // cm
  SolverOptions solver;
  std::vector<double> snapshot_times;
  NetworkConfig network;
  FitConfig fit;
  std::string output_dir = "run";

  bool operator==(const RunConfig& o) const {
    auto geo = [](const GridGeometry& g) {
      return std::tie(g.nx, g.ny, g.width, g.column_height, g.disk_thickness);
    };
    auto soil_t = [](const SoilProps& s) {
      return std::tie(s.theta_r, s.alpha, s.eta, s.disk_permeability);
    };
    auto fl = [](const FluidProps& f) {
      return std::tie(f.mu_w, f.mu_nw, f.rho_w, f.rho_0_nw, f.lambda, f.gravity);
    };
    auto sch = [](const BoundarySchedule& s) {
      return std::tie(s.kind, s.t_end, s.inlet_start, s.inlet_end, s.outlet_start,
                      s.outlet_end, s.inlet_steps);
    };
    auto so = [](const SolverOptions& s) {
      return std::tie(s.picard_tol, s.max_picard, s.dt_initial, s.dt_min, s.dt_max,
                      s.dt_growth, s.growth_after, s.gravity, s.closed_box);
    };
    return geo(geometry) == geo(o.geometry) && soil_t(soil) == soil_t(o.soil) &&
           fl(fluids) == fl(o.fluids) && field == o.field && seed == o.seed &&
           sch(schedule) == sch(o.schedule) && initial_air_head == o.initial_air_head &&
           so(solver) == so(o.solver) && snapshot_times == o.snapshot_times &&
           network == o.network && fit == o.fit && output_dir == o.output_dir;
  }

  void validate() const;
};

namespace detail {

struct ConfigKey {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& field, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
    throw ValidationError(field, "expected a finite number, got '" + v + "'");
  return d;
}

inline std::uint64_t to_u64(const std::string& field, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ValidationError(field, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError(field, "expected true or false, got '" + v + "'");
}

inline std::vector<ConfigKey> config_keys(RunConfig& c) {
  std::vector<ConfigKey> k;
  auto real = [&k](std::string sec, std::string key, double& ref) {
    const std::string name = key;
    k.push_back({sec, key, [&ref, name](const std::string& v) { ref = to_double(name, v); },
                 [&ref] { return fmt(ref); }});
  };
  auto size = [&k](std::string sec, std::string key, std::size_t& ref) {
    const std::string name = key;
    k.push_back({sec, key,
                 [&ref, name](const std::string& v) { ref = static_cast<std::size_t>(to_u64(name, v)); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto integer = [&k](std::string sec, std::string key, int& ref) {
    const std::string name = key;
    k.push_back({sec, key,
                 [&ref, name](const std::string& v) {
                   const auto u = to_u64(name, v);
                   if (u > 1000000) throw ValidationError(name, "too large");
                   ref = static_cast<int>(u);
                 },
                 [&ref] { return std::to_string(ref); }});
  };
  auto u64 = [&k](std::string sec, std::string key, std::uint64_t& ref) {
    const std::string name = key;
    k.push_back({sec, key, [&ref, name](const std::string& v) { ref = to_u64(name, v); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto flag = [&k](std::string sec, std::string key, bool& ref) {
    const std::string name = key;
    k.push_back({sec, key, [&ref, name](const std::string& v) { ref = to_bool(name, v); },
                 [&ref] { return std::string(ref ? "true" : "false"); }});
  };
  auto spec = [&](std::string prefix, FieldSpec& s) {
    real("field", prefix + "_mean", s.mean);
    real("field", prefix + "_std", s.std_dev);
    real("field", prefix + "_min", s.lower_clamp);
    real("field", prefix + "_max", s.upper_clamp);
  };

  size("geometry", "nx", c.geometry.nx);
  size("geometry", "ny", c.geometry.ny);
  real("geometry", "width", c.geometry.width);
  real("geometry", "column_height", c.geometry.column_height);
  real("geometry", "disk_thickness", c.geometry.disk_thickness);

  real("soil", "theta_r", c.soil.theta_r);
  real("soil", "alpha", c.soil.alpha);
  real("soil", "eta", c.soil.eta);
  real("soil", "disk_permeability", c.soil.disk_permeability);

  real("fluids", "mu_w", c.fluids.mu_w);
  real("fluids", "mu_nw", c.fluids.mu_nw);
  real("fluids", "rho_w", c.fluids.rho_w);
  real("fluids", "rho_0_nw", c.fluids.rho_0_nw);
  real("fluids", "lambda", c.fluids.lambda);
  real("fluids", "gravity", c.fluids.gravity);

  u64("field", "seed", c.seed);
  spec("theta_s", c.field.theta_s);
  spec("k", c.field.k_intrinsic);
  spec("n", c.field.n_vg);

  k.push_back({"schedule", "kind",
               [&c](const std::string& v) {
                 if (v == "ramp") c.schedule.kind = ScheduleKind::kRamp;
                 else if (v == "steps") c.schedule.kind = ScheduleKind::kSteps;
                 else throw ValidationError("kind", "expected ramp or steps, got '" + v + "'");
               },
               [&c] { return std::string(c.schedule.kind == ScheduleKind::kRamp ? "ramp" : "steps"); }});
  real("schedule", "t_end", c.schedule.t_end);
  real("schedule", "inlet_start", c.schedule.inlet_start);
  real("schedule", "inlet_end", c.schedule.inlet_end);
  integer("schedule", "inlet_steps", c.schedule.inlet_steps);
  real("schedule", "outlet_start", c.schedule.outlet_start);
  real("schedule", "outlet_end", c.schedule.outlet_end);
  real("schedule", "initial_air_head", c.initial_air_head);

  real("solver", "picard_tol", c.solver.picard_tol);
  integer("solver", "max_picard", c.solver.max_picard);
  real("solver", "dt_initial", c.solver.dt_initial);
  real("solver", "dt_min", c.solver.dt_min);
  real("solver", "dt_max", c.solver.dt_max);
  real("solver", "dt_growth", c.solver.dt_growth);
  integer("solver", "growth_after", c.solver.growth_after);
  flag("solver", "gravity", c.solver.gravity);
  flag("solver", "closed_box", c.solver.closed_box);

  k.push_back({"snapshots", "snapshot_times",
               [&c](const std::string& v) {
                 c.snapshot_times.clear();
                 std::stringstream ss(v);
                 std::string tok;
                 while (std::getline(ss, tok, ','))
                   c.snapshot_times.push_back(to_double("snapshot_times", trim(tok)));
               },
               [&c] {
                 std::string s;
                 for (std::size_t i = 0; i < c.snapshot_times.size(); ++i)
                   s += (i ? ", " : "") + fmt_short(c.snapshot_times[i]);
                 return s;
               }});

  real("network", "xi", c.network.xi);
  real("network", "fraction", c.network.fraction);
  size("network", "lattice_x", c.network.lattice_x);
  size("network", "lattice_y", c.network.lattice_y);
  size("network", "velocity_lattice_x", c.network.velocity_lattice_x);
  size("network", "velocity_lattice_y", c.network.velocity_lattice_y);
  k.push_back({"network", "velocity_metric",
               [&c](const std::string& v) {
                 if (v == "correlation_pvalue") c.network.velocity_metric = Metric::kCorrelationPValue;
                 else if (v == "euclidean") c.network.velocity_metric = Metric::kEuclidean;
                 else throw ValidationError("velocity_metric", "expected correlation_pvalue or euclidean");
               },
               [&c] { return std::string(metric_name(c.network.velocity_metric)); }});
  flag("network", "global_d_max", c.network.global_d_max);
  flag("network", "temporal_blocks", c.network.temporal_blocks);

  size("fit", "velocity_bins", c.fit.velocity_bins);
  k.push_back({"fit", "inverse_clustering",
               [&c](const std::string& v) {
                 if (v == "reciprocal_of_mean") c.fit.inverse_clustering = InverseClusteringMode::kReciprocalOfMean;
                 else if (v == "mean_of_reciprocals") c.fit.inverse_clustering = InverseClusteringMode::kMeanOfReciprocals;
                 else throw ValidationError("inverse_clustering", "expected reciprocal_of_mean or mean_of_reciprocals");
               },
               [&c] {
                 return std::string(c.fit.inverse_clustering == InverseClusteringMode::kReciprocalOfMean
                                        ? "reciprocal_of_mean" : "mean_of_reciprocals");
               }});
  u64("fit", "baseline_seed", c.fit.baseline_seed);
  integer("fit", "baseline_replicates", c.fit.baseline_replicates);

  k.push_back({"output", "dir", [&c](const std::string& v) { c.output_dir = v; },
               [&c] { return c.output_dir; }});
  return k;
}

}  // namespace detail

inline void RunConfig::validate() const {
  geometry.validate();
  soil.validate();
  fluids.validate();
  schedule.validate();
  solver.validate();
  validate_specs(field, soil.theta_r);
  if (!(initial_air_head > -fluids.h0_nw()))
    throw ValidationError("initial_air_head", "air density would be nonpositive");
  if (snapshot_times.empty()) throw ValidationError("snapshot_times", "at least one time required");
  for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
    const double t = snapshot_times[i];
    if (t < 0.0 || t > schedule.t_end)
      throw ValidationError("snapshot_times", "times must lie within [0, t_end]");
    if (i > 0 && !(t > snapshot_times[i - 1]))
      throw ValidationError("snapshot_times", "times must be strictly increasing");
  }
  if (!(network.xi > 0.0 && network.xi < 1.0)) throw ValidationError("xi", "must lie in (0, 1)");
  if (!(network.fraction > 0.0 && network.fraction <= 1.0))
    throw ValidationError("fraction", "must lie in (0, 1]");
  if (network.lattice_x < 2) throw ValidationError("lattice_x", "must be >= 2");
  if (network.lattice_y < 3) throw ValidationError("lattice_y", "must be >= 3");
  if (network.velocity_lattice_x < 2) throw ValidationError("velocity_lattice_x", "must be >= 2");
  if (network.velocity_lattice_y < 3) throw ValidationError("velocity_lattice_y", "must be >= 3");
  if (fit.velocity_bins < 2) throw ValidationError("velocity_bins", "must be >= 2");
  if (fit.baseline_replicates < 1) throw ValidationError("baseline_replicates", "must be >= 1");
  if (output_dir.empty()) throw ValidationError("dir", "must not be empty");
}

/// Parses config text. Unknown sections or keys, duplicates and malformed
/// lines are ParseErrors carrying the 1-based line number.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  auto keys = detail::config_keys(c);
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      const bool known = std::any_of(keys.begin(), keys.end(),
                                     [&](const auto& k) { return k.section == section; });
      if (!known) throw ParseError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ParseError(line_no, "key '" + key + "' outside any section");
    auto it = std::find_if(keys.begin(), keys.end(),
                           [&](const auto& k) { return k.section == section && k.key == key; });
    if (it == keys.end()) throw ParseError(line_no, "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second)
      throw ParseError(line_no, "duplicate key '" + key + "'");
    try {
      it->set(value);
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!seen.count("snapshots.snapshot_times"))
    throw ValidationError("snapshot_times", "missing; list the output times in [snapshots]");
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  return parse_config_text(read_text(path));
}

/// Canonical text form; parse_config_text(serialize_config(c)) == c.
inline std::string serialize_config(const RunConfig& config) {
  RunConfig copy = config;
  const auto keys = detail::config_keys(copy);
  std::string out, section;
  for (const auto& k : keys) {
    if (k.section != section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.key + " = " + k.get() + "\n";
  }
  return out;
}

/// Hash of the canonical text; stamped into every output file.
inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(serialize_config(c))); }

/// Defaults used when no file is given: the shipped configs/default.cfg.
inline RunConfig default_config() {
  RunConfig c;
  c.snapshot_times = {0.005, 0.01, 0.02, 0.04, 0.08, 0.2, 0.4, 0.6, 0.8, 1.0};
  return c;
}

}  // namespace unsatnet
