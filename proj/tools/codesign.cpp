#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "codesign/harness.hpp"

namespace {

using namespace codesign;
using harness::ExperimentConfig;
using harness::ExperimentKind;

int execute(const ExperimentConfig& cfg, const std::string& out) {
  const auto rec = harness::run(cfg, out, &std::cerr);
  std::cout << "status " << harness::to_json(rec)["status"].get<std::string>() << '\n'
            << "result " << rec.result_path.string() << '\n'
            << "trace  " << rec.trace_path.string() << '\n';
  if (rec.final_report) std::cout << "objective " << std::setprecision(12) << rec.final_report->value << '\n';
  if (rec.timing) {
    std::cout << "timing value " << rec.timing->value_seconds << " s, value+gradient " << rec.timing->gradient_seconds
              << " s, ratio " << rec.timing->ratio << '\n';
  }
  if (!rec.error.empty()) std::cerr << "error: " << rec.error << '\n';
  return rec.exit_code();
}

/// "a:b:n" into the scan section.
void apply_delta_range(ExperimentConfig& cfg, const std::string& range) {
  const auto c1 = range.find(':');
  const auto c2 = range.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos) {
    throw ValidationError("--delta-range: expected a:b:n, got '" + range + "'");
  }
  try {
    std::size_t used = 0;
    cfg.scan_min = std::stod(range.substr(0, c1));
    cfg.scan_max = std::stod(range.substr(c1 + 1, c2 - c1 - 1));
    cfg.scan_points = std::stoi(range.substr(c2 + 1), &used);
    if (used != range.size() - c2 - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::logic_error&) {
    throw ValidationError("--delta-range: expected a:b:n, got '" + range + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable co-design of superconducting circuits and their control pulses"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "out";
  long steps = -1;
  long long seed = -1;

  auto* run = app.add_subcommand("run", "Run the experiment a config file describes");
  run->add_option("config", config_path, "INI or JSON config")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--steps", steps, "Override [optimizer] steps")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", seed, "Override the seed")->check(CLI::NonNegativeNumber);

  int chain = 0;
  int levels = 0;
  int repeats = 5;
  auto* bench = app.add_subcommand("bench", "Time the lowest chain eigenvalue with and without its gradient");
  bench->add_option("--chain", chain, "Number of fluxonium sites (3..6)")->required();
  bench->add_option("--levels", levels, "Levels per site (default 5, or 4 for six sites)");
  bench->add_option("--repeats", repeats, "Timed runs per measurement");
  bench->add_option("--out", out, "Output directory");

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare the reverse-mode gradient with finite differences");
  gradcheck->add_option("config", config_path, "INI or JSON config")->required();
  gradcheck->add_option("--out", out, "Output directory");

  std::string delta_range;
  auto* scan = app.add_subcommand("scan", "Objective along shifted phi_p");
  scan->add_option("config", config_path, "INI or JSON config")->required();
  scan->add_option("--delta-range", delta_range, "a:b:n")->required();
  scan->add_option("--out", out, "Output directory");

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "Simultaneous versus alternating minimization");
  demo->add_option("name", demo_name, "appendix-a")->required()->check(CLI::IsMember({"appendix-a"}));
  demo->add_option("--seed", seed, "Seed for the start point")->check(CLI::NonNegativeNumber);
  demo->add_option("--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (*run || *gradcheck || *scan) {
      cfg = harness::load_config(config_path);
    }
    if (*run) {
      if (steps >= 0) cfg.optimizer.steps = steps;
      if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    } else if (*gradcheck) {
      if (cfg.kind == ExperimentKind::Iswap || cfg.kind == ExperimentKind::IswapRobust ||
          cfg.kind == ExperimentKind::CphaseChip) {
        cfg.gradcheck_objective = cfg.kind;
      }
      cfg.kind = ExperimentKind::Gradcheck;
    } else if (*scan) {
      apply_delta_range(cfg, delta_range);
      cfg.kind = ExperimentKind::Scan;
    } else if (*bench) {
      cfg.kind = ExperimentKind::Bench;
      cfg.bench_chains = {chain};
      cfg.bench.levels = levels;
      cfg.bench.repeats = repeats;
    } else if (*demo) {
      cfg.kind = ExperimentKind::Demo;
      if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    }
    cfg.validate();
    return execute(cfg, out);
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
