#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "codesign/chain.hpp"
#include "codesign/objectives.hpp"
#include "codesign/optimize.hpp"

namespace codesign::harness {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { Iswap, IswapRobust, CphaseChip, Scan, Bench, Gradcheck, Demo };

std::string_view kind_name(ExperimentKind kind);
/// Throws ValidationError for an unknown name.
ExperimentKind parse_kind(std::string_view name);

/// Invalid or incomplete configuration. `where` is "line N" or "[section] key".
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& source, const std::string& where, const std::string& message);
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Iswap;
  std::uint64_t seed = 0;

  // [device] and [control]: the iSWAP pair and its pulse.
  objectives::IswapParams iswap;
  objectives::IswapSettings iswap_settings;

  // [chip]: three transmons. A positive calibrate_* target replaces the
  // coupling value by the one reproducing that idle E_ZZ (GHz) at the start.
  objectives::ChipParams chip;
  double calibrate_hm_idle = 0.0;
  double calibrate_ml_idle = 0.0;
  objectives::CphaseSettings cphase_settings;

  optimize::AdamConfig optimizer;

  // [robust]
  double robust_delta_phi_p = 0.005;

  // [scan]
  double scan_min = -0.01;
  double scan_max = 0.01;
  int scan_points = 21;

  // [gradcheck]
  ExperimentKind gradcheck_objective = ExperimentKind::Iswap;
  double gradcheck_rel_tol = 1e-4;
  double gradcheck_abs_floor = 1e-8;
  double gradcheck_rel_step = 1e-6;

  // [bench]
  std::vector<int> bench_chains{3, 4, 5, 6};
  ChainConfig bench;

  // [demo]; without x0 and y0 the start is drawn from `seed`.
  bool demo_start_given = false;
  double demo_x0 = 0.0;
  double demo_y0 = 0.0;
  int demo_sweeps = 30;
  int demo_max_evaluations = 200;
  double demo_target = 1e-8;

  /// The objective a run optimizes or checks.
  ExperimentKind objective_kind() const;
  std::vector<double> scan_deltas() const;
  void validate() const;
};

/// Flat sectioned key-value text. Top-level keys: kind, seed.
ExperimentConfig parse_ini(const std::string& text, const std::string& source = "<ini>");
/// Same layout as the INI form, one object per section. A document with a
/// top-level "config" object (a result file) is read from that object.
ExperimentConfig parse_json(const std::string& text, const std::string& source = "<json>");
/// Picks the format from the extension (.json) or the first non-blank character.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sections relevant to the kind, in a form parse_json accepts.
Json to_json(const ExperimentConfig& cfg);

}  // namespace codesign::harness
