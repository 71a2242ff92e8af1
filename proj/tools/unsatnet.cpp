// Command-line driver: simulate, networks, metrics, fit, pipeline.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "unsatnet/config.hpp"
#include "unsatnet/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int run(const std::string& command, const Options& opt) {
  unsatnet::StageContext ctx;
  try {
    ctx.config = opt.config_path.empty() ? unsatnet::default_config()
                                         : unsatnet::parse_config(opt.config_path);
    if (opt.seed) ctx.config.seed = *opt.seed;
    if (!opt.out.empty()) ctx.config.output_dir = opt.out;
    ctx.config.validate();
  } catch (const unsatnet::ParseError& e) {
    std::cerr << "error in stage 'config': " << opt.config_path << ":" << e.line() << ": "
              << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error in stage 'config': " << e.what() << "\n";
    return 2;
  }
  ctx.out = ctx.config.output_dir;
  ctx.force = opt.force;
  ctx.log = &std::cout;
  std::cout << "config hash " << unsatnet::config_hash(ctx.config) << ", output " << ctx.out.string()
            << "\n";
  try {
    if (command == "pipeline") {
      unsatnet::cmd_pipeline(ctx);
    } else {
      unsatnet::run_stage(command, ctx);
    }
  } catch (const unsatnet::StageError& e) {
    std::cerr << "error in stage '" << e.stage() << "': " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error in stage '" << command << "': " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-phase column simulator and profile-network analysis"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  const std::pair<const char*, const char*> stages[] = {
      {"simulate", "Run the column model and write fields, snapshots and profiles"},
      {"networks", "Build saturation and velocity networks from the profiles"},
      {"metrics", "Clustering, path length and degree summaries per graph"},
      {"fit", "Velocity distribution, k-c and inverse clustering fits"},
      {"pipeline", "All four stages in order"}};
  for (const auto& [name, help] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "Config file (defaults when omitted)");
    sub->add_option("--out", opt.out, "Run directory (overrides [output] dir)");
    sub->add_option("--seed", opt.seed, "Overrides the field seed");
    sub->add_flag("--force", opt.force, "Overwrite existing outputs");
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI11_PARSE(app, argc, argv);
  return run(chosen, opt);
}
