#include "codesign/spectral.hpp"

#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

namespace codesign::spectral {

namespace {

constexpr std::array<std::pair<int, int>, 4> kComputationalLabels{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};

circuits::Subsystem transmon_subsystem(const circuits::TransmonParams& p, double phi_ext, int cutoff) {
  circuits::Subsystem s;
  s.hamiltonian = circuits::transmon_hamiltonian(p, phi_ext, cutoff);
  s.coupling_op = circuits::transmon_charge_operator(cutoff).cast<cplx>();
  return s;
}

}  // namespace

std::vector<std::string> pair_param_names() {
  return {"tuned.e_c", "tuned.e_j", "fixed.e_c", "fixed.e_j", "coupling"};
}

diffkit::ParamVector pair_params(const TransmonPair& pair) {
  using diffkit::Unit;
  diffkit::ParamVector v;
  v.add("tuned.e_c", pair.tuned.e_c, Unit::GHz)
      .add("tuned.e_j", pair.tuned.e_j, Unit::GHz)
      .add("fixed.e_c", pair.fixed.e_c, Unit::GHz)
      .add("fixed.e_j", pair.fixed.e_j, Unit::GHz)
      .add("coupling", pair.coupling.value,
           pair.coupling.kind == CouplingLaw::Kind::Fixed ? Unit::GHz : Unit::per_GHz);
  return v;
}

TransmonPair pair_from_params(const TransmonPair& base, const diffkit::ParamVector& params) {
  TransmonPair out = base;
  out.tuned.e_c = params.value("tuned.e_c");
  out.tuned.e_j = params.value("tuned.e_j");
  out.fixed.e_c = params.value("fixed.e_c");
  out.fixed.e_j = params.value("fixed.e_j");
  out.coupling.value = params.value("coupling");
  return out;
}

PairState evaluate_pair(const TransmonPair& pair, double phi_ext) {
  if (pair.levels < 2) throw ValidationError("transmon pair needs at least 2 levels per qubit");
  PairState s;
  s.phi_ext = phi_ext;
  s.subsystems.push_back(transmon_subsystem(pair.tuned, phi_ext, pair.charge_cutoff));
  s.subsystems.push_back(transmon_subsystem(pair.fixed, 0.0, pair.charge_cutoff));
  const double j = pair.coupling.strength(pair.tuned.e_c, pair.fixed.e_c);
  s.build = circuits::coupled_system(s.subsystems, {circuits::Coupling{0, 1, j}}, pair.levels);
  s.spectrum = eigh(RealMatrix(s.build.system.drift.real()));
  std::vector<Eigen::Index> bare;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto [a, b] = kComputationalLabels[k];
    s.bare[k] = s.build.system.index_of({a, b});
    bare.push_back(s.bare[k]);
  }
  const auto dressed = max_overlap_assignment(s.spectrum.vectors, bare);
  for (std::size_t k = 0; k < 4; ++k) s.dressed[k] = dressed[k];
  return s;
}

BareOverlapMetric bare_overlap_metric(const PairState& state) {
  BareOverlapMetric m;
  m.value = std::numeric_limits<double>::infinity();
  for (Eigen::Index i : state.dressed) {
    double w = 0.0;
    for (Eigen::Index b : state.bare) w += state.spectrum.vectors(b, i) * state.spectrum.vectors(b, i);
    if (w < m.value) {
      m.value = w;
      m.argmin_index = i;
    }
  }
  return m;
}

BareOverlapMetric bare_overlap_metric(const TransmonPair& pair, double phi_ext) {
  return bare_overlap_metric(evaluate_pair(pair, phi_ext));
}

namespace {

double signed_zz(const PairState& s) {
  const auto& e = s.spectrum.values;
  return e(s.dressed[0]) + e(s.dressed[3]) - e(s.dressed[1]) - e(s.dressed[2]);
}

}  // namespace

double e_zz(const PairState& state) { return std::abs(signed_zz(state)); }

double e_zz(const TransmonPair& pair, double phi_ext) { return e_zz(evaluate_pair(pair, phi_ext)); }

RealVector PairAdjoint::params() const {
  RealVector v(5);
  v << tuned_e_c, tuned_e_j, fixed_e_c, fixed_e_j, coupling;
  return v;
}

PairAdjoint& PairAdjoint::operator+=(const PairAdjoint& o) {
  tuned_e_c += o.tuned_e_c;
  tuned_e_j += o.tuned_e_j;
  fixed_e_c += o.fixed_e_c;
  fixed_e_j += o.fixed_e_j;
  coupling += o.coupling;
  phi_ext += o.phi_ext;
  return *this;
}

PairAdjoint PairAdjoint::operator*(double s) const {
  return {tuned_e_c * s, tuned_e_j * s, fixed_e_c * s, fixed_e_j * s, coupling * s, phi_ext * s};
}

PairAdjoint pair_vjp(const TransmonPair& pair, const PairState& state, const RealVector& energies_bar,
                     const RealMatrix& vectors_bar) {
  diffkit::SpectrumAdjoint<double> sa{energies_bar, vectors_bar};
  const RealMatrix h_bar = diffkit::eigh_vjp(state.spectrum, sa);
  const auto cs = circuits::coupled_system_vjp(state.build, h_bar.cast<cplx>(), {});

  PairAdjoint out;
  const double phis[2] = {state.phi_ext, 0.0};
  const circuits::TransmonParams* params[2] = {&pair.tuned, &pair.fixed};
  for (std::size_t i = 0; i < 2; ++i) {
    const RealMatrix sub_bar = circuits::truncation_vjp(state.build.parts[i], state.subsystems[i].coupling_op,
                                                        nullptr, cs.parts[i]);
    const auto t = circuits::transmon_hamiltonian_vjp(sub_bar, *params[i], phis[i]);
    if (i == 0) {
      out.tuned_e_c += t.e_c;
      out.tuned_e_j += t.e_j;
      out.phi_ext += t.phi_ext;
    } else {
      out.fixed_e_c += t.e_c;
      out.fixed_e_j += t.e_j;
    }
  }
  const double j_bar = cs.couplings.at(0);
  if (pair.coupling.kind == CouplingLaw::Kind::Fixed) {
    out.coupling += j_bar;
  } else {
    out.coupling += j_bar * pair.tuned.e_c * pair.fixed.e_c;
    out.tuned_e_c += j_bar * pair.coupling.value * pair.fixed.e_c;
    out.fixed_e_c += j_bar * pair.coupling.value * pair.tuned.e_c;
  }
  return out;
}

PairAdjoint e_zz_vjp(const TransmonPair& pair, const PairState& state) {
  const double s = signed_zz(state) >= 0.0 ? 1.0 : -1.0;
  const Eigen::Index n = state.spectrum.size();
  RealVector e_bar = RealVector::Zero(n);
  e_bar(state.dressed[0]) += s;
  e_bar(state.dressed[3]) += s;
  e_bar(state.dressed[1]) -= s;
  e_bar(state.dressed[2]) -= s;
  return pair_vjp(pair, state, e_bar, RealMatrix());
}

PairAdjoint metric_vjp(const TransmonPair& pair, const PairState& state, Eigen::Index argmin_index) {
  RealMatrix v_bar = RealMatrix::Zero(state.spectrum.size(), argmin_index + 1);
  for (Eigen::Index b : state.bare) v_bar(b, argmin_index) = 2.0 * state.spectrum.vectors(b, argmin_index);
  return pair_vjp(pair, state, RealVector(), v_bar);
}

TransitionFrequency transmon_e01(const circuits::TransmonParams& p, double phi_ext, int charge_cutoff) {
  const RealSpectrum s = eigh(circuits::transmon_hamiltonian(p, phi_ext, charge_cutoff));
  const RealVector v0 = s.vectors.col(0);
  const RealVector v1 = s.vectors.col(1);
  const RealMatrix h_bar = v1 * v1.transpose() - v0 * v0.transpose();
  const auto a = circuits::transmon_hamiltonian_vjp(h_bar, p, phi_ext);
  return {s.values(1) - s.values(0), a.e_c, a.e_j, a.phi_ext};
}

double find_threshold_crossing(const std::function<double(double)>& metric, const SearchConfig& cfg) {
  if (!(cfg.step > 0.0) || !(cfg.phi_max > 0.0)) throw ValidationError("search: step and phi_max must be positive");
  const double m = cfg.threshold;
  if (!(metric(0.0) > m)) throw ValidationError("search: metric at zero flux is not above the threshold");
  double lo = 0.0;
  double hi = 0.0;
  bool crossed = false;
  for (long k = 1;; ++k) {
    const double phi = static_cast<double>(k) * cfg.step;
    if (phi >= cfg.phi_max) break;
    if (metric(phi) < m) {
      lo = static_cast<double>(k - 1) * cfg.step;
      hi = phi;
      crossed = true;
      break;
    }
  }
  if (!crossed) throw NoCrossingError("search: metric never fell below the threshold");

  // Bisect down to the floating-point resolution of the bracket; the residual
  // tolerance is checked afterwards.
  double best = hi;
  double best_res = std::abs(metric(hi) - m);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double g = metric(mid) - m;
    if (std::abs(g) < best_res) {
      best_res = std::abs(g);
      best = mid;
    }
    if (g == 0.0) break;
    if (g < 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (best_res > cfg.tolerance) {
    throw SolverFailure("search: bisection ended with residual " + std::to_string(best_res));
  }
  return best;
}

OperatingPoint find_operating_point(const TransmonPair& pair, const SearchConfig& cfg) {
  double phi = 0.0;
  try {
    phi = find_threshold_crossing([&](double x) { return bare_overlap_metric(pair, x).value; }, cfg);
  } catch (const GaugeAmbiguityError& e) {
    throw NoCrossingError(std::string("search: states lost their labels before the threshold (") + e.what() + ")");
  } catch (const AssignmentTieError& e) {
    throw NoCrossingError(std::string("search: states lost their labels before the threshold (") + e.what() + ")");
  }
  const PairState s = evaluate_pair(pair, phi);
  const auto m = bare_overlap_metric(s);
  OperatingPoint op;
  op.phi_ext_stop = phi;
  op.metric_at_stop = m.value;
  op.argmin_index = m.argmin_index;
  for (std::size_t k = 0; k < 4; ++k) op.computational_assignment[kComputationalLabels[k]] = s.dressed[k];
  return op;
}

RealVector implicit_gradient(double g_phi, const RealVector& g_p) {
  if (!(std::abs(g_phi) >= 1e-12)) {
    throw IllConditionedRootError("implicit gradient: d metric / d phi vanishes at the root");
  }
  return -g_p / g_phi;
}

PairAdjoint operating_point_gradient(const TransmonPair& pair, const OperatingPoint& op) {
  const PairState s = evaluate_pair(pair, op.phi_ext_stop);
  const PairAdjoint g = metric_vjp(pair, s, op.argmin_index);
  const RealVector d = implicit_gradient(g.phi_ext, g.params());
  return {d(0), d(1), d(2), d(3), d(4), 0.0};
}

diffkit::Gradient operating_point_gradient(const TransmonPair& pair, const OperatingPoint& op,
                                           const diffkit::ParamVector& params) {
  const RealVector d = operating_point_gradient(pair, op).params();
  const auto names = pair_param_names();
  diffkit::Gradient out = diffkit::Gradient::zeros(params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (params.contains(names[i])) out.at(names[i]) = d(static_cast<Eigen::Index>(i));
  }
  return out;
}

double calibrate_coupling(const TransmonPair& pair, double target_idle_e_zz, double j_lo, double j_hi) {
  if (!(target_idle_e_zz > 0.0)) throw ValidationError("calibration target must be positive");
  const double scale =
      pair.coupling.kind == CouplingLaw::Kind::Fixed ? 1.0 : pair.tuned.e_c * pair.fixed.e_c;
  auto residual = [&](double j) {
    TransmonPair p = pair;
    p.coupling.value = j / scale;
    return e_zz(p, 0.0) - target_idle_e_zz;
  };
  if (residual(j_lo) * residual(j_hi) > 0.0) {
    throw ValidationError("calibration target is not bracketed by the coupling range");
  }
  boost::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      residual, j_lo, j_hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (a + b) / scale;
}

}  // namespace codesign::spectral
