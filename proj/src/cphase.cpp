#include <cmath>

#include "codesign/objectives.hpp"

namespace codesign::objectives {

using diffkit::relu;
using diffkit::relu_grad;
using spectral::PairAdjoint;
using spectral::TransmonPair;

namespace {

constexpr double kHzPerGHz = 1e9;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Charge-dispersion and anharmonicity penalties of one transmon with their
/// derivatives in (e_c, e_j).
struct QubitPenalties {
  double tm = 0.0;
  double ah = 0.0;
  double tm_d_e_c = 0.0;
  double tm_d_e_j = 0.0;
  double ah_d_e_c = 0.0;
};

QubitPenalties qubit_penalties(const circuits::TransmonParams& q, const CphaseConstants& k) {
  QubitPenalties p;
  const double ratio = q.e_j / q.e_c;
  const double x = k.c_tm - ratio;
  p.tm = relu(x);
  p.tm_d_e_c = relu_grad(x) * ratio / q.e_c;
  p.tm_d_e_j = -relu_grad(x) / q.e_c;
  const double y = k.c_ah2 - q.e_c;
  p.ah = k.c_ah1 * relu(y) * relu(y);
  p.ah_d_e_c = -2.0 * k.c_ah1 * relu(y);
  return p;
}

}  // namespace

ObjectiveReport cphase_pair_objective(const TransmonPair& pair, const CphaseSettings& s, bool with_gradient) {
  pair.tuned.validate();
  pair.fixed.validate();
  const auto& k = s.constants;

  const auto op = spectral::find_operating_point(pair, s.search);
  const auto gate_state = spectral::evaluate_pair(pair, op.phi_ext_stop);
  const auto idle_state = spectral::evaluate_pair(pair, 0.0);
  const double e_gate = spectral::e_zz(gate_state);
  const double e_idle = spectral::e_zz(idle_state);
  if (!(e_gate > 0.0)) throw DomainError("cphase_pair_objective: gate E_ZZ vanishes");

  const auto f1 = spectral::transmon_e01(pair.tuned, 0.0, pair.charge_cutoff);
  const auto f2 = spectral::transmon_e01(pair.fixed, 0.0, pair.charge_cutoff);
  const double p_decoh = f1.value + f2.value;

  double gate = 0.0;
  double gate_d_decoh = 0.0;
  double gate_d_ezz = 0.0;
  if (k.gate_form == GateTermForm::Reciprocal) {
    gate = p_decoh / (k.c_scale * e_gate);
    gate_d_decoh = 1.0 / (k.c_scale * e_gate);
    gate_d_ezz = -gate / e_gate;
  } else {
    gate = e_gate / p_decoh * k.c_scale;
    gate_d_decoh = -gate / p_decoh;
    gate_d_ezz = k.c_scale / p_decoh;
  }

  const double zz_arg = e_idle * kHzPerGHz - k.c_zz2;
  const double p_zz_idle = k.c_zz1 * relu(zz_arg);
  const auto pen1 = qubit_penalties(pair.tuned, k);
  const auto pen2 = qubit_penalties(pair.fixed, k);
  const double detuning = f1.value - f2.value;
  const double fd_arg = k.c_fdiff2 - std::abs(detuning) * kHzPerGHz;
  const double p_fdiff = k.c_fdiff1 * relu(fd_arg) * relu(fd_arg);

  ObjectiveReport report;
  report.terms = {{"gate_term", gate},        {"p_zz_idle", p_zz_idle}, {"p_tm_tuned", pen1.tm},
                  {"p_tm_fixed", pen2.tm},    {"p_ah_tuned", pen1.ah},  {"p_ah_fixed", pen2.ah},
                  {"p_fdiff", p_fdiff}};
  report.value = report.recompute();
  report.diagnostics = {{"e_zz_gate", e_gate},
                        {"e_zz_idle", e_idle},
                        {"phi_stop", op.phi_ext_stop},
                        {"metric_at_stop", op.metric_at_stop},
                        {"p_decoh", p_decoh},
                        {"e01_tuned", f1.value},
                        {"e01_fixed", f2.value}};
  if (!with_gradient) return report;

  // Gate E_ZZ moves with the parameters and with the operating point.
  PairAdjoint g = spectral::e_zz_vjp(pair, gate_state);
  g += spectral::operating_point_gradient(pair, op) * g.phi_ext;
  g.phi_ext = 0.0;
  g = g * gate_d_ezz;

  PairAdjoint idle = spectral::e_zz_vjp(pair, idle_state);
  idle.phi_ext = 0.0;
  g += idle * (k.c_zz1 * relu_grad(zz_arg) * kHzPerGHz);

  const double fd_bar = k.c_fdiff1 * 2.0 * relu(fd_arg) * -kHzPerGHz * sign(detuning);
  const double f1_bar = gate_d_decoh + fd_bar;
  const double f2_bar = gate_d_decoh - fd_bar;
  g.tuned_e_c += f1_bar * f1.d_e_c + pen1.tm_d_e_c + pen1.ah_d_e_c;
  g.tuned_e_j += f1_bar * f1.d_e_j + pen1.tm_d_e_j;
  g.fixed_e_c += f2_bar * f2.d_e_c + pen2.tm_d_e_c + pen2.ah_d_e_c;
  g.fixed_e_j += f2_bar * f2.d_e_j + pen2.tm_d_e_j;

  report.gradient = diffkit::Gradient::zeros(spectral::pair_params(pair));
  report.gradient.values = g.params();
  return report;
}

std::vector<std::string> ChipParams::names() {
  return {"H.e_c", "H.e_j", "M.e_c", "M.e_j", "L.e_c", "L.e_j", "hm.coupling", "ml.coupling"};
}

diffkit::ParamVector ChipParams::to_vector() const {
  using diffkit::Unit;
  auto unit = [](const spectral::CouplingLaw& c) {
    return c.kind == spectral::CouplingLaw::Kind::Fixed ? Unit::GHz : Unit::per_GHz;
  };
  diffkit::ParamVector v;
  v.add("H.e_c", high.e_c, Unit::GHz)
      .add("H.e_j", high.e_j, Unit::GHz)
      .add("M.e_c", mid.e_c, Unit::GHz)
      .add("M.e_j", mid.e_j, Unit::GHz)
      .add("L.e_c", low.e_c, Unit::GHz)
      .add("L.e_j", low.e_j, Unit::GHz)
      .add("hm.coupling", hm.value, unit(hm))
      .add("ml.coupling", ml.value, unit(ml));
  return v;
}

ChipParams ChipParams::with_vector(const diffkit::ParamVector& v) const {
  ChipParams out = *this;
  out.high = {v.value("H.e_c"), v.value("H.e_j")};
  out.mid = {v.value("M.e_c"), v.value("M.e_j")};
  out.low = {v.value("L.e_c"), v.value("L.e_j")};
  out.hm.value = v.value("hm.coupling");
  out.ml.value = v.value("ml.coupling");
  return out;
}

TransmonPair ChipParams::hm_pair() const { return {high, mid, hm, levels, charge_cutoff}; }

TransmonPair ChipParams::ml_pair() const { return {mid, low, ml, levels, charge_cutoff}; }

ObjectiveReport chip_objective(const ChipParams& chip, const CphaseSettings& s, bool with_gradient) {
  const auto hm = cphase_pair_objective(chip.hm_pair(), s, with_gradient);
  const auto ml = cphase_pair_objective(chip.ml_pair(), s, with_gradient);
  const auto pen_m = qubit_penalties(chip.mid, s.constants);

  ObjectiveReport report;
  for (const auto& [name, v] : hm.terms) report.terms["hm." + name] = v;
  for (const auto& [name, v] : ml.terms) report.terms["ml." + name] = v;
  report.terms["m_counted_twice"] = -(pen_m.tm + pen_m.ah);
  report.value = report.recompute();
  for (const auto& [name, v] : hm.diagnostics) report.diagnostics["hm." + name] = v;
  for (const auto& [name, v] : ml.diagnostics) report.diagnostics["ml." + name] = v;
  if (!with_gradient) return report;

  report.gradient = diffkit::Gradient::zeros(chip.to_vector());
  auto& g = report.gradient.values;  // H.e_c H.e_j M.e_c M.e_j L.e_c L.e_j hm ml
  const RealVector& a = hm.gradient.values;  // tuned.e_c tuned.e_j fixed.e_c fixed.e_j coupling
  const RealVector& b = ml.gradient.values;
  g(0) += a(0);
  g(1) += a(1);
  g(2) += a(2) + b(0) - pen_m.tm_d_e_c - pen_m.ah_d_e_c;
  g(3) += a(3) + b(1) - pen_m.tm_d_e_j;
  g(4) += b(2);
  g(5) += b(3);
  g(6) += a(4);
  g(7) += b(4);
  return report;
}

}  // namespace codesign::objectives
