#include "codesign/harness.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <locale>
#include <ostream>
#include <random>
#include <sstream>

namespace codesign::harness {

int RunRecord::exit_code() const {
  switch (status) {
    case RunStatus::Ok: return 0;
    case RunStatus::Failed: return 1;
    case RunStatus::CheckFailed: return 3;
  }
  return 1;
}

Json to_json(const objectives::ObjectiveReport& report) {
  Json j;
  j["value"] = report.value;
  j["terms"] = Json(report.terms);
  j["diagnostics"] = Json(report.diagnostics);
  if (report.gradient.size() > 0) {
    Json g = Json::object();
    for (std::size_t i = 0; i < report.gradient.size(); ++i) {
      g[report.gradient.names[i]] = report.gradient.values(static_cast<Eigen::Index>(i));
    }
    j["gradient"] = g;
  }
  return j;
}

Json to_json(const diffkit::ParamVector& params) {
  Json j = Json::object();
  for (const auto& p : params) j[p.name] = p.value;
  return j;
}

Json to_json(const BenchReport& r) {
  auto stats = [](const TimingStats& t) { return Json{{"median", t.median}, {"min", t.min}, {"max", t.max}}; };
  return Json{{"n_fm", r.n_fm},
              {"levels", r.levels},
              {"dimension", r.dimension},
              {"n_params", r.n_params},
              {"ground_energy", r.ground_energy},
              {"gradcheck_max_rel_error", r.gradcheck_max_rel_error},
              {"gradcheck_pass", r.gradcheck_pass},
              {"value_seconds", stats(r.value_time)},
              {"gradient_seconds", stats(r.gradient_time)},
              {"ratio", r.ratio},
              {"speedup", r.speedup}};
}

Json to_json(const optimize::DemoReport& r) {
  return Json{{"start", {r.start_x, r.start_y}},
              {"initial_value", r.initial_value},
              {"simultaneous_value", r.simultaneous_value},
              {"simultaneous_evaluations", r.simultaneous_evaluations},
              {"alternating_value", r.alternating_value},
              {"alternating_solves", r.alternating_solves},
              {"sweep_ratios", r.sweep_ratios},
              {"predicted_sweep_ratio", r.predicted_sweep_ratio}};
}

namespace {

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Failed: return "failed";
    case RunStatus::CheckFailed: return "check-failed";
  }
  return "failed";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// CSV with a header row, '.' decimals and full double precision. Lines are
/// flushed as they are written so an aborted run leaves its trace behind.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    out_.imbue(std::locale::classic());
    out_ << std::setprecision(17);
  }

  void header(const std::vector<std::string>& columns) {
    row_begin();
    for (const auto& c : columns) cell(c);
    row_end();
  }

  void row_begin() { first_ = true; }
  template <typename T>
  void cell(const T& v) {
    if (!first_) out_ << ',';
    first_ = false;
    out_ << v;
  }
  void cell(const std::string& s) {
    if (!first_) out_ << ',';
    first_ = false;
    if (s.find_first_of(",\"\n") == std::string::npos) {
      out_ << s;
      return;
    }
    out_ << '"';
    for (char ch : s) out_ << (ch == '"' ? std::string("\"\"") : std::string(1, ch));
    out_ << '"';
  }
  void row_end() { out_ << '\n' << std::flush; }

 private:
  std::ofstream out_;
  bool first_ = true;
};

struct Problem {
  diffkit::ParamVector init;
  optimize::Evaluator eval;
  Json extras = Json::object();
};

Problem make_problem(const ExperimentConfig& c, std::ostream* log) {
  Problem p;
  const auto s = c.iswap_settings;
  switch (c.objective_kind()) {
    case ExperimentKind::Iswap:
      p.init = c.iswap.to_vector();
      p.eval = [s](const diffkit::ParamVector& v, bool g) {
        return objectives::iswap_objective(objectives::IswapParams::from_vector(v), s, g);
      };
      break;
    case ExperimentKind::IswapRobust: {
      p.init = c.iswap.to_vector();
      const auto deltas = objectives::phi_p_deltas(c.robust_delta_phi_p);
      p.eval = [s, deltas](const diffkit::ParamVector& v, bool g) {
        return objectives::robust_objective(objectives::IswapParams::from_vector(v), deltas, s, g);
      };
      break;
    }
    case ExperimentKind::CphaseChip: {
      objectives::ChipParams chip = c.chip;
      if (c.calibrate_hm_idle > 0.0) {
        chip.hm.value = spectral::calibrate_coupling(chip.hm_pair(), c.calibrate_hm_idle);
        if (log) *log << "calibrated hm coupling " << chip.hm.value << '\n';
      }
      if (c.calibrate_ml_idle > 0.0) {
        chip.ml.value = spectral::calibrate_coupling(chip.ml_pair(), c.calibrate_ml_idle);
        if (log) *log << "calibrated ml coupling " << chip.ml.value << '\n';
      }
      p.extras["hm_coupling"] = chip.hm.value;
      p.extras["ml_coupling"] = chip.ml.value;
      p.init = chip.to_vector();
      const auto cs = c.cphase_settings;
      p.eval = [chip, cs](const diffkit::ParamVector& v, bool g) {
        return objectives::chip_objective(chip.with_vector(v), cs, g);
      };
      break;
    }
    default: throw ValidationError("no objective for this experiment kind");
  }
  return p;
}

/// Evaluator that remembers the cost of its first value-only and first
/// value-and-gradient call.
struct TimedEvaluator {
  optimize::Evaluator inner;
  std::optional<double> value_seconds;
  std::optional<double> gradient_seconds;

  objectives::ObjectiveReport operator()(const diffkit::ParamVector& v, bool g) {
    const auto start = std::chrono::steady_clock::now();
    auto r = inner(v, g);
    const double t = seconds_since(start);
    auto& slot = g ? gradient_seconds : value_seconds;
    if (!slot) slot = t;
    return r;
  }

  Timing timing(const diffkit::ParamVector& at) {
    if (!value_seconds) (*this)(at, false);
    if (!gradient_seconds) (*this)(at, true);
    return {*value_seconds, *gradient_seconds, *gradient_seconds / *value_seconds};
  }
};

void run_optimization(const ExperimentConfig& c, std::ostream* log, RunRecord& rec) {
  Problem problem = make_problem(c, log);
  TimedEvaluator timed{problem.eval, {}, {}};
  CsvWriter csv(rec.trace_path);
  std::vector<std::string> term_names;
  const long every = c.optimizer.snapshot_every;
  auto on_step = [&](const optimize::TraceRecord& r) {
    if (term_names.empty()) {
      std::vector<std::string> cols{"step", "loss", "lr"};
      for (const auto& [name, v] : r.terms) {
        term_names.push_back(name);
        cols.push_back(name);
      }
      csv.header(cols);
    }
    csv.row_begin();
    csv.cell(r.step);
    csv.cell(r.value);
    csv.cell(r.lr);
    for (const auto& name : term_names) csv.cell(r.terms.at(name));
    csv.row_end();
    if (log && (r.step % every == 0 || r.step == c.optimizer.steps)) {
      *log << "step " << r.step << " loss " << std::setprecision(10) << r.value << " lr " << r.lr << '\n';
    }
  };
  auto evaluator = [&timed](const diffkit::ParamVector& v, bool g) { return timed(v, g); };
  const auto result = optimize::adam_run(evaluator, problem.init, c.optimizer, on_step);

  rec.final_params = result.params;
  Json snaps = Json::array();
  for (const auto& s : result.trace.snapshots) snaps.push_back({{"step", s.step}, {"params", to_json(s.params)}});
  rec.results = problem.extras;
  rec.results["initial_params"] = to_json(problem.init);
  rec.results["steps_completed"] = result.trace.records.empty() ? 0 : result.trace.records.back().step;
  if (!result.trace.records.empty()) {
    rec.final_report = result.final_report;
    rec.results["initial_value"] = result.trace.records.front().value;
    rec.results["final_value"] = result.trace.records.back().value;
  }
  rec.results["snapshots"] = snaps;
  if (result.trace.aborted) {
    rec.status = RunStatus::Failed;
    rec.error = result.trace.error;
    return;
  }
  rec.timing = timed.timing(result.params);
}

void run_gradcheck(const ExperimentConfig& c, std::ostream* log, RunRecord& rec) {
  Problem problem = make_problem(c, log);
  TimedEvaluator timed{problem.eval, {}, {}};
  std::optional<objectives::ObjectiveReport> at_x;
  auto value = [&](const diffkit::ParamVector& v) { return timed(v, false).value; };
  auto grad = [&](const diffkit::ParamVector& v) {
    auto r = timed(v, true);
    at_x = r;
    return r.gradient;
  };
  diffkit::FiniteDiffOptions fd;
  fd.rel_step = c.gradcheck_rel_step;
  fd.threads = diffkit::thread_budget();
  const auto check =
      diffkit::check_gradient(value, grad, problem.init, c.gradcheck_rel_tol, c.gradcheck_abs_floor, fd);

  CsvWriter csv(rec.trace_path);
  csv.header({"name", "reverse", "finite_diff", "rel_error", "pass"});
  Json comps = Json::array();
  for (const auto& comp : check.components) {
    csv.row_begin();
    csv.cell(comp.name);
    csv.cell(comp.reverse);
    csv.cell(comp.finite_diff);
    csv.cell(comp.rel_error);
    csv.cell(comp.pass ? 1 : 0);
    csv.row_end();
    comps.push_back({{"name", comp.name},
                     {"reverse", comp.reverse},
                     {"finite_diff", comp.finite_diff},
                     {"rel_error", comp.rel_error},
                     {"pass", comp.pass}});
    if (log) {
      *log << std::left << std::setw(14) << comp.name << " rel " << std::setprecision(3) << comp.rel_error
           << (comp.pass ? "  ok" : "  FAIL") << '\n';
    }
  }
  rec.final_params = problem.init;
  rec.final_report = at_x;
  rec.results = problem.extras;
  rec.results["components"] = comps;
  rec.results["max_rel_error"] = check.max_rel_error;
  rec.results["all_pass"] = check.all_pass;
  rec.timing = timed.timing(problem.init);
  if (!check.all_pass) {
    rec.status = RunStatus::CheckFailed;
    rec.error = "gradient check failed";
  }
}

void run_scan(const ExperimentConfig& c, std::ostream* log, RunRecord& rec) {
  const auto deltas = c.scan_deltas();
  const auto points = optimize::robustness_scan(c.iswap, deltas, c.iswap_settings, diffkit::thread_budget());
  CsvWriter csv(rec.trace_path);
  csv.header({"delta_phi_p", "objective", "ok", "error"});
  Json arr = Json::array();
  int failures = 0;
  for (const auto& p : points) {
    csv.row_begin();
    csv.cell(p.delta);
    csv.cell(p.value);
    csv.cell(p.ok ? 1 : 0);
    csv.cell(p.error);
    csv.row_end();
    Json j{{"delta_phi_p", p.delta}, {"ok", p.ok}};
    if (p.ok) {
      j["objective"] = p.value;
    } else {
      j["error"] = p.error;
      ++failures;
    }
    arr.push_back(j);
    if (log) *log << "delta " << p.delta << " objective " << std::setprecision(10) << p.value << '\n';
  }
  rec.final_params = c.iswap.to_vector();
  rec.results["points"] = arr;
  rec.results["failures"] = failures;
}

void run_bench(const ExperimentConfig& c, std::ostream* log, RunRecord& rec) {
  CsvWriter csv(rec.trace_path);
  csv.header({"n_fm", "levels", "dimension", "n_params", "ground_energy", "gradcheck_max_rel_error",
              "gradcheck_pass", "value_median", "value_min", "value_max", "gradient_median", "gradient_min",
              "gradient_max", "ratio", "speedup"});
  Json arr = Json::array();
  for (int n : c.bench_chains) {
    ChainConfig b = c.bench;
    b.n_fm = n;
    b.grid = c.iswap_settings.grid;
    const BenchReport r = bench_diag_chain(b);
    csv.row_begin();
    csv.cell(r.n_fm);
    csv.cell(r.levels);
    csv.cell(r.dimension);
    csv.cell(r.n_params);
    csv.cell(r.ground_energy);
    csv.cell(r.gradcheck_max_rel_error);
    csv.cell(r.gradcheck_pass ? 1 : 0);
    for (const auto& t : {r.value_time, r.gradient_time}) {
      csv.cell(t.median);
      csv.cell(t.min);
      csv.cell(t.max);
    }
    csv.cell(r.ratio);
    csv.cell(r.speedup);
    csv.row_end();
    arr.push_back(to_json(r));
    if (log) {
      *log << "n_fm " << n << " dim " << r.dimension << " gradcheck " << std::setprecision(3)
           << r.gradcheck_max_rel_error << (r.gradcheck_pass ? " ok" : " FAIL") << " value " << r.value_time.median
           << " s  value+gradient " << r.gradient_time.median << " s  ratio " << r.ratio << '\n';
    }
    if (!r.gradcheck_pass) {
      rec.status = RunStatus::CheckFailed;
      rec.error = "gradient check failed for n_fm = " + std::to_string(n);
    } else if (c.bench_chains.size() == 1) {
      rec.timing = Timing{r.value_time.median, r.gradient_time.median, r.ratio};
    }
  }
  rec.results["chains"] = arr;
}

void run_demo(const ExperimentConfig& c, std::ostream* log, RunRecord& rec) {
  double x0 = c.demo_x0;
  double y0 = c.demo_y0;
  if (!c.demo_start_given) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    x0 = u(rng);
    y0 = u(rng);
  }
  const auto r = optimize::alternating_vs_simultaneous_demo(x0, y0, c.demo_sweeps, c.demo_max_evaluations,
                                                            c.demo_target);
  CsvWriter csv(rec.trace_path);
  csv.header({"solve", "alternating_value"});
  for (std::size_t i = 0; i < r.alternating_values.size(); ++i) {
    csv.row_begin();
    csv.cell(i + 1);
    csv.cell(r.alternating_values[i]);
    csv.row_end();
  }
  rec.results = to_json(r);
  rec.results["advantage"] = r.alternating_value / std::max(r.simultaneous_value, 1e-300);
  const auto first = optimize::demo_first_steps(x0, y0);
  rec.results["first_step"] = {{"simultaneous", first.simultaneous}, {"alternating", first.alternating}};
  if (log) {
    *log << std::setprecision(6) << "start (" << x0 << ", " << y0 << ")\n"
         << "simultaneous: f = " << r.simultaneous_value << " after " << r.simultaneous_evaluations
         << " evaluations\n"
         << "alternating:  f = " << r.alternating_value << " after " << r.alternating_solves << " solves\n";
  }
}

}  // namespace

diffkit::ParamVector start_params(const ExperimentConfig& cfg) { return make_problem(cfg, nullptr).init; }

Json to_json(const RunRecord& record) {
  Json j;
  j["config"] = record.config;
  j["status"] = status_name(record.status);
  if (!record.error.empty()) j["error"] = record.error;
  j["eigh_backend"] = spectral::eigh_backend();
  j["trace"] = record.trace_path.filename().string();
  if (!record.final_params.empty()) j["final_params"] = to_json(record.final_params);
  if (record.final_report) j["final_objective"] = to_json(*record.final_report);
  if (record.timing) {
    j["timing"] = {{"value_seconds", record.timing->value_seconds},
                   {"gradient_seconds", record.timing->gradient_seconds},
                   {"ratio", record.timing->ratio}};
  }
  j["results"] = record.results;
  return j;
}

RunRecord run(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* log) {
  cfg.validate();
  std::filesystem::create_directories(out);
  RunRecord rec;
  rec.config = to_json(cfg);
  rec.trace_path = out / "trace.csv";
  rec.result_path = out / "result.json";
  try {
    switch (cfg.kind) {
      case ExperimentKind::Iswap:
      case ExperimentKind::IswapRobust:
      case ExperimentKind::CphaseChip: run_optimization(cfg, log, rec); break;
      case ExperimentKind::Gradcheck: run_gradcheck(cfg, log, rec); break;
      case ExperimentKind::Scan: run_scan(cfg, log, rec); break;
      case ExperimentKind::Bench: run_bench(cfg, log, rec); break;
      case ExperimentKind::Demo: run_demo(cfg, log, rec); break;
    }
  } catch (const std::exception& e) {
    rec.status = RunStatus::Failed;
    rec.error = e.what();
  }
  std::ofstream f(rec.result_path);
  if (!f) throw Error("cannot write " + rec.result_path.string());
  f << to_json(rec).dump(2) << '\n';
  return rec;
}

}  // namespace codesign::harness
