#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "codesign/config.hpp"

namespace codesign::harness {

struct Timing {
  double value_seconds = 0.0;     ///< one objective evaluation
  double gradient_seconds = 0.0;  ///< one objective plus gradient evaluation
  double ratio = 0.0;             ///< gradient_seconds / value_seconds
};

enum class RunStatus {
  Ok,
  Failed,       ///< runtime failure; the trace so far is on disk
  CheckFailed,  ///< gradcheck or bench gradient check did not pass
};

struct RunRecord {
  Json config;  ///< effective configuration, accepted by parse_json
  RunStatus status = RunStatus::Ok;
  std::string error;
  std::filesystem::path trace_path;   ///< CSV, columns fixed by the kind
  std::filesystem::path result_path;  ///< JSON: {"config", "status", "results", ...}
  diffkit::ParamVector final_params;
  std::optional<objectives::ObjectiveReport> final_report;
  std::optional<Timing> timing;
  Json results = Json::object();  ///< kind-specific output

  int exit_code() const;
};

/// Dispatches on cfg.kind, writes <out>/trace.csv and <out>/result.json and
/// returns the record. Progress lines go to `log` when given.
RunRecord run(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);

/// Result document as written to result.json.
Json to_json(const RunRecord& record);

Json to_json(const objectives::ObjectiveReport& report);
Json to_json(const diffkit::ParamVector& params);
Json to_json(const BenchReport& report);
Json to_json(const optimize::DemoReport& report);

/// Parameters of the objective a config describes, at its start point.
diffkit::ParamVector start_params(const ExperimentConfig& cfg);

}  // namespace codesign::harness
