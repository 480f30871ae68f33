#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "codesign/diffkit.hpp"
#include "codesign/objectives.hpp"

namespace codesign::optimize {

struct AdamConfig {
  double r_init = 0.003;
  /// Learning rate halves every this many steps; 0 keeps it constant.
  double decay_halflife_steps = 5000.0;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
  long steps = 2000;
  long snapshot_every = 100;

  void validate() const;
};

/// r_init 2^(-step / halflife).
double lr_schedule(const AdamConfig& cfg, long step);

struct TraceRecord {
  long step = 0;
  double value = 0.0;
  double lr = 0.0;
  std::map<std::string, double> terms;
};

struct Snapshot {
  long step = 0;
  diffkit::ParamVector params;
};

struct OptTrace {
  std::vector<TraceRecord> records;  ///< one per evaluated point, the last one is the final point
  std::vector<Snapshot> snapshots;   ///< every snapshot_every steps plus the final point
  bool aborted = false;
  std::string error;
};

/// Objective report at a point; the gradient is only needed when requested.
using Evaluator = std::function<objectives::ObjectiveReport(const diffkit::ParamVector&, bool with_gradient)>;
using StepCallback = std::function<void(const TraceRecord&)>;

struct AdamResult {
  diffkit::ParamVector params;  ///< last point with a finite objective
  objectives::ObjectiveReport final_report;
  OptTrace trace;
};

/// Adam with the scheduled learning rate. Evaluates steps + 1 points (the
/// last without gradient). A non-finite objective or gradient, or an exception
/// from the evaluator, stops the run with trace.aborted set.
AdamResult adam_run(const Evaluator& objective, const diffkit::ParamVector& init, const AdamConfig& cfg,
                    const StepCallback& on_step = {});

// ---------------------------------------------------------------------------
// Robustness scans.

struct ScanPoint {
  double delta = 0.0;
  double value = 0.0;
  bool ok = false;
  std::string error;
};

/// iswap_objective with phi_p shifted by each delta. Failures are recorded and
/// the scan continues. Points are evaluated on up to `threads` threads; the
/// output order follows `deltas`.
std::vector<ScanPoint> robustness_scan(const objectives::IswapParams& p, const std::vector<double>& deltas,
                                       const objectives::IswapSettings& s, int threads = 1);

/// (O(+d) - 2 O(0) + O(-d)) / d^2 around phi_p.
double phi_p_curvature(const objectives::IswapParams& p, double d, const objectives::IswapSettings& s);

// ---------------------------------------------------------------------------
// Simultaneous versus alternating minimization on 100 (x - y)^2 + (x + y)^2.

double demo_objective(double x, double y);

struct DemoReport {
  double start_x = 0.0;
  double start_y = 0.0;
  double initial_value = 0.0;
  double simultaneous_value = 0.0;
  int simultaneous_evaluations = 0;  ///< value and gradient evaluations
  double alternating_value = 0.0;
  int alternating_solves = 0;        ///< exact single-coordinate minimizations
  std::vector<double> sweep_ratios;  ///< f after / f before each x-then-y sweep
  double predicted_sweep_ratio = 0.0;
  std::vector<double> alternating_values;  ///< after every coordinate solve
};

/// BFGS with exact line search against `sweeps` x-then-y exact coordinate
/// minimizations.
DemoReport alternating_vs_simultaneous_demo(double x0, double y0, int sweeps = 30, int max_evaluations = 200,
                                            double target = 1e-8);

/// First displacement of each method from (x0, y0): steepest descent with an
/// exact line search and a single exact x-minimization.
struct FirstSteps {
  std::array<double, 2> simultaneous{};
  std::array<double, 2> alternating{};
};
FirstSteps demo_first_steps(double x0, double y0);

}  // namespace codesign::optimize
