#include "codesign/evolution.hpp"

#include <algorithm>
#include <cmath>

#include "codesign/diffkit.hpp"
#include "codesign/spectral.hpp"

namespace codesign::evolution {

namespace {

constexpr double kTwoPi = 2.0 * circuits::kPi;
constexpr double kBreakpointMergeTol = 1e-12;
const cplx kMinusTwoPiI(0.0, -kTwoPi);

struct Boundary {
  double time = 0.0;
  int waveform = -1;  ///< owner of d_time, -1 if the boundary does not move
  std::vector<double> d_time;
};

/// Everything fixed before time stepping starts.
struct Plan {
  spectral::Spectrum spectrum;
  std::vector<ComplexMatrix> ctilde;
  std::array<Eigen::Index, 4> dressed{};
  std::vector<Boundary> bounds;
  std::vector<long> steps;
  std::vector<double> widths;  ///< h per segment
  double tau = 0.0;
  long total_steps = 0;
};

Plan make_plan(const ControlledSystem& sys, double tau, const SolverConfig& cfg) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("propagate: tau must be positive");
  if (!(cfg.dt > 0.0)) throw ValidationError("propagate: dt must be positive");
  if (cfg.checkpoint_interval < 1) throw ValidationError("propagate: checkpoint interval must be positive");
  if (sys.controls.size() != sys.waveforms.size()) {
    throw ValidationError("propagate: one waveform per control operator is required");
  }
  const Eigen::Index n = sys.drift.rows();
  for (const auto& c : sys.controls) {
    if (c.rows() != n || c.cols() != n) throw ValidationError("propagate: control operator shape mismatch");
    require_hermitian(c, "propagate control");
  }
  for (Eigen::Index b : sys.computational) {
    if (b < 0 || b >= n) throw ValidationError("propagate: computational index out of range");
  }

  Plan plan;
  plan.tau = tau;
  plan.spectrum = spectral::eigh(sys.drift);
  const auto& w = plan.spectrum.vectors;
  for (const auto& c : sys.controls) plan.ctilde.push_back(w.adjoint() * c * w);
  const auto dressed = spectral::max_overlap_assignment(
      w, std::vector<Eigen::Index>(sys.computational.begin(), sys.computational.end()));
  std::copy(dressed.begin(), dressed.end(), plan.dressed.begin());

  std::vector<Boundary> candidates;
  candidates.push_back({0.0, -1, {}});
  Boundary end{tau, -1, {}};
  for (std::size_t k = 0; k < sys.waveforms.size(); ++k) {
    for (const auto& bp : sys.waveforms[k]->breakpoints()) {
      if (std::abs(bp.time - tau) <= kBreakpointMergeTol) {
        if (end.waveform < 0) end = {tau, static_cast<int>(k), bp.d_time};
      } else if (bp.time > kBreakpointMergeTol && bp.time < tau) {
        candidates.push_back({bp.time, static_cast<int>(k), bp.d_time});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Boundary& a, const Boundary& b) { return a.time < b.time; });
  for (const auto& c : candidates) {
    if (!plan.bounds.empty() && c.time - plan.bounds.back().time <= kBreakpointMergeTol) continue;
    plan.bounds.push_back(c);
  }
  plan.bounds.push_back(end);

  for (std::size_t s = 0; s + 1 < plan.bounds.size(); ++s) {
    const double len = plan.bounds[s + 1].time - plan.bounds[s].time;
    const long steps = std::max(1L, std::lround(len / cfg.dt));
    plan.steps.push_back(steps);
    plan.widths.push_back(len / static_cast<double>(steps));
    plan.total_steps += steps;
  }
  return plan;
}

/// Interaction-picture generator A(t) = -2 pi i P (sum_k f_k C~_k) P^*, P = diag(e^{2 pi i E t}),
/// applied to a block of columns without forming A.
struct Stage {
  double t = 0.0;
  ComplexVector p;
  ComplexMatrix z, u, k;  ///< input, P^* z, output
  std::vector<ComplexMatrix> w;  ///< C~_j u
  std::vector<double> f;
};

class Generator {
 public:
  Generator(const ControlledSystem& sys, const Plan& plan) : sys_(sys), plan_(plan) {}

  ComplexVector phases(double t) const {
    return (cplx(0.0, kTwoPi * t) * plan_.spectrum.values.cast<cplx>()).array().exp();
  }

  void apply(double t, const ComplexVector& p, const ComplexMatrix& z, Stage& st) const {
    const std::size_t nc = plan_.ctilde.size();
    st.t = t;
    st.p = p;
    st.z = z;
    st.u.noalias() = p.conjugate().asDiagonal() * z;
    st.w.resize(nc);
    st.f.resize(nc);
    ComplexMatrix v = ComplexMatrix::Zero(z.rows(), z.cols());
    for (std::size_t j = 0; j < nc; ++j) {
      st.f[j] = sys_.waveforms[j]->value(t);
      st.w[j].noalias() = plan_.ctilde[j] * st.u;
      if (st.f[j] != 0.0) v += st.f[j] * st.w[j];
    }
    st.k.noalias() = kMinusTwoPiI * (p.asDiagonal() * v);
  }

 private:
  const ControlledSystem& sys_;
  const Plan& plan_;
};

constexpr std::array<double, 4> kStageOffset = {0.0, 0.5, 0.5, 1.0};

struct StepState {
  std::array<Stage, 4> stage;
};

double stage_time(const Plan& plan, std::size_t s, long k, double c) {
  return plan.bounds[s].time + (static_cast<double>(k) + c) * plan.widths[s];
}

/// One RK4 step from y; returns the increment.
ComplexMatrix rk4_step(const Generator& gen, const Plan& plan, std::size_t s, long k, const ComplexMatrix& y,
                       StepState& st) {
  const double h = plan.widths[s];
  const double t0 = stage_time(plan, s, k, 0.0);
  const double tm = stage_time(plan, s, k, 0.5);
  const double t1 = stage_time(plan, s, k, 1.0);
  auto& g = st.stage;
  const ComplexVector pm = gen.phases(tm);
  gen.apply(t0, gen.phases(t0), y, g[0]);
  gen.apply(tm, pm, y + 0.5 * h * g[0].k, g[1]);
  gen.apply(tm, pm, y + 0.5 * h * g[1].k, g[2]);
  gen.apply(t1, gen.phases(t1), y + h * g[2].k, g[3]);
  return (h / 6.0) * (g[0].k + 2.0 * g[1].k + 2.0 * g[2].k + g[3].k);
}

ComplexMatrix initial_columns(const Plan& plan, bool full) {
  const Eigen::Index n = plan.spectrum.size();
  if (full) return ComplexMatrix::Identity(n, n);
  ComplexMatrix y = ComplexMatrix::Zero(n, 4);
  for (int c = 0; c < 4; ++c) y(plan.dressed[static_cast<std::size_t>(c)], c) = 1.0;
  return y;
}

/// Forward sweep. Stores the state before every `interval`-th step when
/// `checkpoints` is given.
ComplexMatrix integrate(const ControlledSystem& sys, const Plan& plan, ComplexMatrix y, int interval,
                        std::vector<ComplexMatrix>* checkpoints) {
  const Generator gen(sys, plan);
  StepState st;
  long g = 0;
  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    for (long k = 0; k < plan.steps[s]; ++k, ++g) {
      if (checkpoints != nullptr && g % interval == 0) checkpoints->push_back(y);
      y += rk4_step(gen, plan, s, k, y, st);
    }
  }
  return y;
}

PropagationResult finish(const Plan& plan, const ComplexMatrix& y, bool full, const SolverConfig& cfg) {
  PropagationResult r;
  r.gate_time = plan.tau;
  r.dressed = plan.dressed;
  r.unitarity_deviation =
      (y.adjoint() * y - ComplexMatrix::Identity(y.cols(), y.cols())).cwiseAbs().maxCoeff();
  if (!(r.unitarity_deviation <= cfg.unitarity_check_tol)) {
    throw SolverFailure("propagate: unitarity deviation " + std::to_string(r.unitarity_deviation) +
                        " exceeds tolerance");
  }
  const RealVector& e = plan.spectrum.values;
  r.u_comp.resize(4, 4);
  for (int row = 0; row < 4; ++row) {
    const Eigen::Index dr = plan.dressed[static_cast<std::size_t>(row)];
    const cplx phase = std::exp(cplx(0.0, -kTwoPi * e(dr) * plan.tau));
    for (int col = 0; col < 4; ++col) {
      const Eigen::Index yc = full ? plan.dressed[static_cast<std::size_t>(col)] : col;
      r.u_comp(row, col) = phase * y(dr, yc);
    }
  }
  r.leakage = 1.0 - r.u_comp.squaredNorm() / 4.0;
  if (full) {
    const ComplexVector ph = (cplx(0.0, -kTwoPi * plan.tau) * e.cast<cplx>()).array().exp();
    const auto& w = plan.spectrum.vectors;
    r.u_full = w * ph.asDiagonal() * y * w.adjoint();
  }
  return r;
}

}  // namespace

ControlledSystem controlled_system(const circuits::TruncatedSystem& system,
                                   const std::vector<const Waveform*>& waveforms) {
  if (system.levels.size() != 2) throw ValidationError("controlled_system: expected two subsystems");
  ControlledSystem out;
  out.drift = system.drift;
  out.controls = system.controls;
  out.waveforms = waveforms;
  out.computational = {system.index_of({0, 0}), system.index_of({0, 1}), system.index_of({1, 0}),
                       system.index_of({1, 1})};
  return out;
}

PropagationResult propagate(const ControlledSystem& sys, double tau, const SolverConfig& cfg) {
  const Plan plan = make_plan(sys, tau, cfg);
  const ComplexMatrix y = integrate(sys, plan, initial_columns(plan, cfg.full_unitary),
                                    cfg.checkpoint_interval, nullptr);
  return finish(plan, y, cfg.full_unitary, cfg);
}

EvolutionGradient propagate_grad(const ControlledSystem& sys, double tau, const SolverConfig& cfg,
                                 const ComplexMatrix& u_comp_bar) {
  return propagate_grad(sys, tau, cfg, [&](const PropagationResult&) { return u_comp_bar; });
}

EvolutionGradient propagate_grad(const ControlledSystem& sys, double tau, const SolverConfig& cfg,
                                 const CotangentFn& cotangent) {
  const Plan plan = make_plan(sys, tau, cfg);
  const Eigen::Index n = plan.spectrum.size();
  const RealVector& e = plan.spectrum.values;
  const int interval = cfg.checkpoint_interval;

  std::vector<ComplexMatrix> checkpoints;
  const ComplexMatrix y_end = integrate(sys, plan, initial_columns(plan, false), interval, &checkpoints);

  EvolutionGradient out;
  out.forward = finish(plan, y_end, false, cfg);
  const ComplexMatrix u_comp_bar = cotangent(out.forward);
  if (u_comp_bar.rows() != 4 || u_comp_bar.cols() != 4) {
    throw ValidationError("propagate_grad: cotangent must be 4x4");
  }

  // Output phases e^{-2 pi i E_r tau}.
  RealVector e_bar = RealVector::Zero(n);
  double tau_bar = 0.0;
  ComplexMatrix y_bar = ComplexMatrix::Zero(n, 4);
  for (int row = 0; row < 4; ++row) {
    const Eigen::Index dr = plan.dressed[static_cast<std::size_t>(row)];
    const cplx phase = std::exp(cplx(0.0, -kTwoPi * e(dr) * tau));
    for (int col = 0; col < 4; ++col) {
      const cplx ub = u_comp_bar(row, col);
      y_bar(dr, col) += std::conj(phase) * ub;
      const double w = std::real(std::conj(ub) * kMinusTwoPiI * phase * y_end(dr, col));
      e_bar(dr) += w * tau;
      tau_bar += w * e(dr);
    }
  }

  const std::size_t n_ctrl = sys.controls.size();
  std::vector<ComplexMatrix> ctilde_bar(n_ctrl, ComplexMatrix::Zero(n, n));
  std::vector<std::vector<double>> param_bar(n_ctrl);
  for (std::size_t k = 0; k < n_ctrl; ++k) param_bar[k].assign(sys.waveforms[k]->num_params(), 0.0);
  std::vector<double> bound_bar(plan.bounds.size(), 0.0);
  bound_bar.back() += tau_bar;

  const Generator gen(sys, plan);
  const Eigen::Index cols = y_end.cols();

  // Per block, C~_bar_j += sum over stages of (f_j vbar) u^H, gathered column-wise.
  const Eigen::Index cap = 4 * cols * interval;
  std::vector<ComplexMatrix> wbar_cols(n_ctrl, ComplexMatrix(n, cap));
  std::vector<ComplexMatrix> u_cols(n_ctrl, ComplexMatrix(n, cap));
  Eigen::Index used = 0;

  // Cotangent of a stage output pushed to its input, E, C~, f and t. Returns the input cotangent.
  auto stage_vjp = [&](const Stage& st, const ComplexMatrix& k_bar, std::size_t s, double& t_bar) {
    const ComplexMatrix v_bar = cplx(0.0, kTwoPi) * (st.p.conjugate().asDiagonal() * k_bar);
    ComplexMatrix u_bar = ComplexMatrix::Zero(n, cols);
    const double seg_begin = plan.bounds[s].time;
    const double seg_end = plan.bounds[s + 1].time;
    t_bar = 0.0;
    for (std::size_t j = 0; j < n_ctrl; ++j) {
      const double f_bar = real_inner(v_bar, st.w[j]);
      const double f = st.f[j];
      if (f != 0.0) {
        u_bar.noalias() += plan.ctilde[j] * (f * v_bar);
        wbar_cols[j].middleCols(used, cols) = f * v_bar;
        u_cols[j].middleCols(used, cols) = st.u;
      } else {
        wbar_cols[j].middleCols(used, cols).setZero();
        u_cols[j].middleCols(used, cols).setZero();
      }
      t_bar += sys.waveforms[j]->time_derivative(st.t, seg_begin, seg_end) * f_bar;
      sys.waveforms[j]->accumulate_param_grad(st.t, seg_begin, seg_end, f_bar, param_bar[j]);
    }
    used += cols;
    ComplexMatrix z_bar = st.p.asDiagonal() * u_bar;
    // Phase cotangent per level: d/dtheta_r with p_r = e^{i theta_r}, theta_r = 2 pi E_r t.
    const RealVector theta_bar =
        kTwoPi * ((z_bar.conjugate().cwiseProduct(st.z)).imag().rowwise().sum() -
                  (k_bar.conjugate().cwiseProduct(st.k)).imag().rowwise().sum());
    e_bar += st.t * theta_bar;
    t_bar += e.dot(theta_bar);
    return z_bar;
  };

  // Global step index -> (segment, local step).
  std::vector<long> seg_start(plan.steps.size() + 1, 0);
  for (std::size_t s = 0; s < plan.steps.size(); ++s) seg_start[s + 1] = seg_start[s] + plan.steps[s];
  auto locate = [&](long g) {
    const auto it = std::upper_bound(seg_start.begin(), seg_start.end(), g);
    const auto s = static_cast<std::size_t>(std::distance(seg_start.begin(), it) - 1);
    return std::pair<std::size_t, long>{s, g - seg_start[s]};
  };

  std::vector<double> h_bar(plan.steps.size(), 0.0);
  StepState st;
  std::vector<ComplexMatrix> block;
  for (long cp = static_cast<long>(checkpoints.size()) - 1; cp >= 0; --cp) {
    const long g0 = cp * interval;
    const long g1 = std::min(plan.total_steps, g0 + interval);
    block.clear();
    block.push_back(checkpoints[static_cast<std::size_t>(cp)]);
    for (long g = g0; g + 1 < g1; ++g) {
      const auto [s, k] = locate(g);
      block.push_back(block.back() + rk4_step(gen, plan, s, k, block.back(), st));
    }
    used = 0;
    for (long g = g1 - 1; g >= g0; --g) {
      const auto [s, k] = locate(g);
      const double h = plan.widths[s];
      const ComplexMatrix& y = block[static_cast<std::size_t>(g - g0)];
      rk4_step(gen, plan, s, k, y, st);
      const auto& sg = st.stage;

      double hb = real_inner(y_bar, (sg[0].k + 2.0 * sg[1].k + 2.0 * sg[2].k + sg[3].k) / 6.0);
      std::array<ComplexMatrix, 4> k_bar = {(h / 6.0) * y_bar, (h / 3.0) * y_bar, (h / 3.0) * y_bar,
                                            (h / 6.0) * y_bar};
      std::array<double, 4> t_bar{};
      // z_i = y + a_i h k_{i-1} with a = (1/2, 1/2, 1).
      constexpr std::array<double, 4> kPrev = {0.0, 0.5, 0.5, 1.0};
      for (int i = 3; i >= 0; --i) {
        const auto iu = static_cast<std::size_t>(i);
        const ComplexMatrix z_bar = stage_vjp(sg[iu], k_bar[iu], s, t_bar[iu]);
        y_bar += z_bar;
        if (i > 0) {
          k_bar[iu - 1] += kPrev[iu] * h * z_bar;
          hb += kPrev[iu] * real_inner(z_bar, sg[iu - 1].k);
        }
      }
      const double kd = static_cast<double>(k);
      for (std::size_t i = 0; i < 4; ++i) {
        bound_bar[s] += t_bar[i];
        hb += (kd + kStageOffset[i]) * t_bar[i];
      }
      h_bar[s] += hb;
    }
    for (std::size_t j = 0; j < n_ctrl; ++j) {
      ctilde_bar[j].noalias() += wbar_cols[j].leftCols(used) * u_cols[j].leftCols(used).adjoint();
    }
  }

  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    const double d = h_bar[s] / static_cast<double>(plan.steps[s]);
    bound_bar[s + 1] += d;
    bound_bar[s] -= d;
  }
  for (std::size_t i = 0; i < plan.bounds.size(); ++i) {
    const auto& b = plan.bounds[i];
    if (b.waveform < 0) continue;
    auto& pb = param_bar[static_cast<std::size_t>(b.waveform)];
    for (std::size_t j = 0; j < pb.size() && j < b.d_time.size(); ++j) pb[j] += bound_bar[i] * b.d_time[j];
  }
  out.tau_bar = plan.bounds.back().waveform < 0 ? bound_bar.back() : 0.0;

  // Back through C~ = W^H C W and the drift diagonalization.
  const auto& w = plan.spectrum.vectors;
  ComplexMatrix w_bar = ComplexMatrix::Zero(n, n);
  for (std::size_t j = 0; j < n_ctrl; ++j) {
    const ComplexMatrix cw = sys.controls[j] * w;
    w_bar.noalias() += cw * ctilde_bar[j].adjoint();
    w_bar.noalias() += sys.controls[j].adjoint() * w * ctilde_bar[j];
    out.controls_bar.push_back(w * ctilde_bar[j] * w.adjoint());
  }
  diffkit::SpectrumAdjoint<cplx> sa{e_bar, w_bar};
  out.drift_bar = diffkit::eigh_vjp(plan.spectrum, sa);
  out.waveform_params_bar = std::move(param_bar);
  return out;
}

}  // namespace codesign::evolution
