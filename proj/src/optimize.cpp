#include "codesign/optimize.hpp"

#include <cmath>
#include <future>

namespace codesign::optimize {

void AdamConfig::validate() const {
  if (!(r_init > 0.0)) throw ValidationError("adam: r_init must be positive");
  if (!(b1 > 0.0 && b1 < 1.0) || !(b2 > 0.0 && b2 < 1.0)) throw ValidationError("adam: b1 and b2 must lie in (0, 1)");
  if (!(eps > 0.0)) throw ValidationError("adam: eps must be positive");
  if (!(decay_halflife_steps >= 0.0)) throw ValidationError("adam: decay half-life must not be negative");
  if (steps < 0) throw ValidationError("adam: steps must not be negative");
  if (snapshot_every < 1) throw ValidationError("adam: snapshot cadence must be positive");
}

double lr_schedule(const AdamConfig& cfg, long step) {
  if (step < 0) throw ValidationError("lr_schedule: negative step");
  if (cfg.decay_halflife_steps == 0.0) return cfg.r_init;
  return cfg.r_init * std::exp2(-static_cast<double>(step) / cfg.decay_halflife_steps);
}

AdamResult adam_run(const Evaluator& objective, const diffkit::ParamVector& init, const AdamConfig& cfg,
                    const StepCallback& on_step) {
  cfg.validate();
  AdamResult out;
  out.params = init;
  const Eigen::Index n = static_cast<Eigen::Index>(init.size());
  RealVector x = init.values();
  RealVector m = RealVector::Zero(n);
  RealVector v = RealVector::Zero(n);
  double b1t = 1.0;
  double b2t = 1.0;

  for (long step = 0; step <= cfg.steps; ++step) {
    const bool last = step == cfg.steps;
    const diffkit::ParamVector point = init.with_values(x);
    objectives::ObjectiveReport r;
    try {
      r = objective(point, !last);
    } catch (const std::exception& e) {
      out.trace.aborted = true;
      out.trace.error = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    if (!std::isfinite(r.value) || (!last && !r.gradient.finite())) {
      out.trace.aborted = true;
      out.trace.error = "step " + std::to_string(step) + ": non-finite objective or gradient";
      break;
    }
    if (!last && r.gradient.values.size() != n) {
      throw ValidationError("adam: gradient size does not match the parameters");
    }
    out.params = point;
    TraceRecord rec{step, r.value, lr_schedule(cfg, step), r.terms};
    out.trace.records.push_back(rec);
    if (step % cfg.snapshot_every == 0 || last) out.trace.snapshots.push_back({step, point});
    if (on_step) on_step(rec);
    out.final_report = std::move(r);
    if (last) break;

    const RealVector& g = out.final_report.gradient.values;
    m = cfg.b1 * m + (1.0 - cfg.b1) * g;
    v = cfg.b2 * v + (1.0 - cfg.b2) * g.cwiseAbs2();
    b1t *= cfg.b1;
    b2t *= cfg.b2;
    const RealVector m_hat = m / (1.0 - b1t);
    const RealVector v_hat = v / (1.0 - b2t);
    x -= rec.lr * (m_hat.array() / (v_hat.array().sqrt() + cfg.eps)).matrix();
  }
  return out;
}

std::vector<ScanPoint> robustness_scan(const objectives::IswapParams& p, const std::vector<double>& deltas,
                                       const objectives::IswapSettings& s, int threads) {
  auto eval = [&](double d) {
    ScanPoint pt;
    pt.delta = d;
    try {
      objectives::IswapParams q = p;
      q.control.phi_p += d;
      pt.value = objectives::iswap_objective(q, s, false).value;
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    return pt;
  };
  std::vector<ScanPoint> out(deltas.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t begin = 0; begin < deltas.size(); begin += width) {
    const std::size_t end = std::min(deltas.size(), begin + width);
    if (width == 1) {
      out[begin] = eval(deltas[begin]);
      continue;
    }
    std::vector<std::future<ScanPoint>> jobs;
    for (std::size_t i = begin; i < end; ++i) jobs.push_back(std::async(std::launch::async, eval, deltas[i]));
    for (std::size_t i = begin; i < end; ++i) out[i] = jobs[i - begin].get();
  }
  return out;
}

double phi_p_curvature(const objectives::IswapParams& p, double d, const objectives::IswapSettings& s) {
  if (!(d > 0.0)) throw ValidationError("phi_p_curvature: step must be positive");
  const auto pts = robustness_scan(p, {-d, 0.0, d}, s);
  for (const auto& pt : pts) {
    if (!pt.ok) throw EvaluationError("phi_p_curvature: " + pt.error);
  }
  return (pts[2].value - 2.0 * pts[1].value + pts[0].value) / (d * d);
}

// ---------------------------------------------------------------------------

double demo_objective(double x, double y) {
  const double a = x - y;
  const double b = x + y;
  return 100.0 * a * a + b * b;
}

namespace {

using Vec2 = Eigen::Vector2d;

Vec2 demo_gradient(const Vec2& p) {
  const double a = p(0) - p(1);
  const double b = p(0) + p(1);
  return {200.0 * a + 2.0 * b, -200.0 * a + 2.0 * b};
}

double f2(const Vec2& p) { return demo_objective(p(0), p(1)); }

/// Minimizer of f(p + t d) from f(p), its slope along d and f(p + d); the
/// restriction to a line is an exact parabola.
double line_minimum(double f0, double slope, double f1) {
  const double curvature = 2.0 * (f1 - f0 - slope);
  return curvature > 0.0 ? -slope / curvature : 0.0;
}

// d f / d x = 0 at fixed y gives x = (99 / 101) y, and symmetrically for y.
constexpr double kCoordinateRatio = 99.0 / 101.0;

}  // namespace

DemoReport alternating_vs_simultaneous_demo(double x0, double y0, int sweeps, int max_evaluations, double target) {
  if (sweeps < 1 || max_evaluations < 2) throw ValidationError("demo: budgets must be positive");
  DemoReport r;
  r.start_x = x0;
  r.start_y = y0;
  r.initial_value = demo_objective(x0, y0);

  Vec2 p(x0, y0);
  Eigen::Matrix2d inv_h = Eigen::Matrix2d::Identity();
  double f = f2(p);
  Vec2 g = demo_gradient(p);
  int evals = 2;
  while (f >= target && evals + 3 <= max_evaluations) {
    const Vec2 d = -inv_h * g;
    const double slope = g.dot(d);
    if (!(slope < 0.0)) break;
    const double t = line_minimum(f, slope, f2(p + d));
    const Vec2 s = t * d;
    p += s;
    const Vec2 g_new = demo_gradient(p);
    f = f2(p);
    evals += 3;
    const Vec2 yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 0.0) {
      const Eigen::Matrix2d i2 = Eigen::Matrix2d::Identity();
      const double rho = 1.0 / sy;
      inv_h = (i2 - rho * s * yv.transpose()) * inv_h * (i2 - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    g = g_new;
  }
  r.simultaneous_value = f;
  r.simultaneous_evaluations = evals;

  double x = x0;
  double y = y0;
  for (int k = 0; k < sweeps; ++k) {
    const double before = demo_objective(x, y);
    x = kCoordinateRatio * y;
    r.alternating_values.push_back(demo_objective(x, y));
    y = kCoordinateRatio * x;
    r.alternating_values.push_back(demo_objective(x, y));
    r.alternating_solves += 2;
    if (before > 0.0) r.sweep_ratios.push_back(demo_objective(x, y) / before);
  }
  r.alternating_value = demo_objective(x, y);
  r.predicted_sweep_ratio = std::pow(kCoordinateRatio, 4);
  return r;
}

FirstSteps demo_first_steps(double x0, double y0) {
  const Vec2 p(x0, y0);
  const Vec2 d = -demo_gradient(p);
  const double t = line_minimum(f2(p), -d.squaredNorm(), f2(p + d));
  FirstSteps out;
  out.simultaneous = {t * d(0), t * d(1)};
  out.alternating = {kCoordinateRatio * y0 - x0, 0.0};
  return out;
}

}  // namespace codesign::optimize
