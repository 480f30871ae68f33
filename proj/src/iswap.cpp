#include <cmath>

#include "codesign/objectives.hpp"

namespace codesign::objectives {

using circuits::ControlParams;
using circuits::FluxoniumParams;
using diffkit::relu;
using diffkit::relu_grad;

std::vector<std::string> IswapParams::names() {
  return {"e_c1", "e_j1", "e_l1", "e_c2", "e_j2", "e_l2", "j_c", "t_ramp", "t_plateau", "phi_p"};
}

diffkit::ParamVector IswapParams::to_vector() const {
  using diffkit::Unit;
  diffkit::ParamVector v;
  v.add("e_c1", q1.e_c, Unit::GHz)
      .add("e_j1", q1.e_j, Unit::GHz)
      .add("e_l1", q1.e_l, Unit::GHz)
      .add("e_c2", q2.e_c, Unit::GHz)
      .add("e_j2", q2.e_j, Unit::GHz)
      .add("e_l2", q2.e_l, Unit::GHz)
      .add("j_c", j_c, Unit::GHz)
      .add("t_ramp", control.t_ramp, Unit::ns)
      .add("t_plateau", control.t_plateau, Unit::ns)
      .add("phi_p", control.phi_p, Unit::radian);
  return v;
}

IswapParams IswapParams::from_vector(const diffkit::ParamVector& v) {
  IswapParams p;
  p.q1 = {v.value("e_c1"), v.value("e_j1"), v.value("e_l1")};
  p.q2 = {v.value("e_c2"), v.value("e_j2"), v.value("e_l2")};
  p.j_c = v.value("j_c");
  p.control = {v.value("t_ramp"), v.value("t_plateau"), v.value("phi_p")};
  return p;
}

std::vector<ControlParams> phi_p_deltas(double d) { return {{0.0, 0.0, d}, {0.0, 0.0, -d}}; }

namespace {

constexpr double kPi = circuits::kPi;

/// <0|phi|1> on the kept eigenvectors.
double phase_element(const RealVector& phi, const RealMatrix& p) {
  return p.col(0).dot(phi.cwiseProduct(p.col(1)));
}

}  // namespace

ObjectiveReport iswap_objective(const IswapParams& p, const IswapSettings& s, bool with_gradient) {
  p.q1.validate();
  p.q2.validate();
  p.control.validate();
  const auto& k = s.constants.physical;
  const auto ops = circuits::fluxonium_operators(s.grid);
  const ComplexMatrix n_op = ops.n_op();
  const RealVector x_pi = ops.phi.array() + kPi;
  const ComplexMatrix c2 = (p.q2.e_l * x_pi).cast<cplx>().asDiagonal();

  std::vector<circuits::Subsystem> subs(2);
  subs[0].hamiltonian = circuits::fluxonium_hamiltonian(p.q1, kPi, ops);
  subs[0].coupling_op = n_op;
  subs[1].hamiltonian = circuits::fluxonium_hamiltonian(p.q2, kPi, ops);
  subs[1].coupling_op = n_op;
  subs[1].control_op = c2;
  const auto build = circuits::coupled_system(subs, {circuits::Coupling{0, 1, p.j_c}}, s.levels);

  // Plateau spectrum of the driven qubit for the flux-noise slope.
  const double phi_plateau = kPi + p.control.phi_p;
  const auto plateau = spectral::eigh(circuits::fluxonium_hamiltonian(p.q2, phi_plateau, ops));
  const RealVector x_plateau = ops.phi.array() + phi_plateau;
  const RealVector v0 = plateau.vectors.col(0);
  const RealVector v1 = plateau.vectors.col(1);
  const double slope = p.q2.e_l * (x_plateau.cwiseProduct(v1.cwiseProduct(v1) - v0.cwiseProduct(v0))).sum();

  const circuits::TrapezoidDrive drive(p.control);
  const auto sys = evolution::controlled_system(build.system, {&drive});
  const double tau = p.control.gate_time();
  const ComplexMatrix target = iswap_target();

  // Penalties that do not depend on the propagation.
  QubitLossInputs loss[2];
  const FluxoniumParams* q[2] = {&p.q1, &p.q2};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& part = build.parts[i];
    loss[i].f01 = part.spectrum.values(1) - part.spectrum.values(0);
    loss[i].e_c = q[i]->e_c;
    loss[i].phi01 = phase_element(ops.phi, part.spectrum.vectors.leftCols(2));
  }
  const auto gd1 = dielectric_rate_grad(loss[0].f01, loss[0].e_c, loss[0].phi01, k);
  const auto gd2 = dielectric_rate_grad(loss[1].f01, loss[1].e_c, loss[1].phi01, k);
  const double gamma_f = flux_noise_rate(slope, k);
  const double p_decoh = tau * (0.5 * (gd1.value + gd2.value) + gamma_f);
  const double detuning = loss[0].f01 - loss[1].f01;
  const double p_fdiff = s.constants.c_fdiff * relu(s.constants.delta - std::abs(detuning));
  const double r1 = relu(s.constants.c_fm2 - p.q1.e_j);
  const double r2 = relu(s.constants.c_fm2 - p.q2.e_j);
  const double p_fm = s.constants.c_fm1 * (r1 * r1 + r2 * r2);
  const double penalties = p_decoh + p_fdiff + p_fm;

  ObjectiveReport report;
  report.logarithmic = true;
  auto fill = [&](const evolution::PropagationResult& fwd) {
    const double f = compensated_fidelity(fwd.u_comp, target);
    const double arg = 1.0 - f + penalties;
    if (!(arg > 0.0)) throw DomainError("iswap_objective: logarithm argument is not positive");
    report.value = std::log(arg);
    report.terms = {{"fidelity", f}, {"p_decoh", p_decoh}, {"p_fdiff", p_fdiff}, {"p_fm", p_fm}};
    report.diagnostics = {{"leakage", fwd.leakage},
                          {"unitarity_deviation", fwd.unitarity_deviation},
                          {"gate_time", tau},
                          {"e01_1", loss[0].f01},
                          {"e01_2", loss[1].f01},
                          {"gamma_d1", gd1.value},
                          {"gamma_d2", gd2.value},
                          {"gamma_f2", gamma_f}};
    return arg;
  };

  if (!with_gradient) {
    fill(evolution::propagate(sys, tau, s.solver));
    return report;
  }

  double arg = 0.0;
  const auto eg = evolution::propagate_grad(sys, tau, s.solver, [&](const evolution::PropagationResult& fwd) {
    arg = fill(fwd);
    return compensated_fidelity_vjp(fwd.u_comp, target, -1.0 / arg);
  });
  const double pen_bar = 1.0 / arg;

  diffkit::Gradient g = diffkit::Gradient::zeros(p.to_vector());
  auto& gv = g.values;  // e_c1 e_j1 e_l1 e_c2 e_j2 e_l2 j_c t_ramp t_plateau phi_p

  // Control parameters through the waveform and its breakpoints.
  const auto& wb = eg.waveform_params_bar.at(0);
  gv(7) += wb[0];
  gv(8) += wb[1];
  gv(9) += wb[2];

  auto cs = circuits::coupled_system_vjp(build, eg.drift_bar, eg.controls_bar);
  gv(6) += cs.couplings.at(0);

  // Penalty cotangents.
  const double pd_bar = pen_bar;
  const double gd_bar = pd_bar * tau * 0.5;
  gv(7) += pd_bar * 2.0 * (0.5 * (gd1.value + gd2.value) + gamma_f);
  gv(8) += pd_bar * (0.5 * (gd1.value + gd2.value) + gamma_f);
  const double fd_bar = pen_bar * s.constants.c_fdiff * relu_grad(s.constants.delta - std::abs(detuning)) *
                        -(detuning > 0.0 ? 1.0 : (detuning < 0.0 ? -1.0 : 0.0));
  const double f01_bar[2] = {gd_bar * gd1.d_f01 + fd_bar, gd_bar * gd2.d_f01 - fd_bar};
  const double phi01_bar[2] = {gd_bar * gd1.d_phi01, gd_bar * gd2.d_phi01};
  gv(0) += gd_bar * gd1.d_e_c;
  gv(3) += gd_bar * gd2.d_e_c;
  gv(1) += pen_bar * s.constants.c_fm1 * -2.0 * r1;
  gv(4) += pen_bar * s.constants.c_fm1 * -2.0 * r2;

  // Explicit E_L,2 dependence of the control operator.
  {
    const auto& cp = *build.parts[1].control_projected;
    gv(5) += real_inner(cs.parts[1].control_projected, cp) / p.q2.e_l;
  }

  for (std::size_t i = 0; i < 2; ++i) {
    const auto& part = build.parts[i];
    auto& adj = cs.parts[i];
    adj.energies(1) += f01_bar[i];
    adj.energies(0) -= f01_bar[i];
    const RealMatrix pk = part.spectrum.vectors.leftCols(part.levels);
    RealMatrix extra = RealMatrix::Zero(pk.rows(), pk.cols());
    extra.col(0) += phi01_bar[i] * ops.phi.cwiseProduct(pk.col(1));
    extra.col(1) += phi01_bar[i] * ops.phi.cwiseProduct(pk.col(0));
    const ComplexMatrix* ctrl = subs[i].control_op ? &*subs[i].control_op : nullptr;
    const RealMatrix h_bar = circuits::truncation_vjp(part, subs[i].coupling_op, ctrl, adj, extra);
    const auto fa = circuits::fluxonium_hamiltonian_vjp(h_bar, *q[i], kPi, ops);
    gv(3 * static_cast<Eigen::Index>(i) + 0) += fa.e_c;
    gv(3 * static_cast<Eigen::Index>(i) + 1) += fa.e_j;
    gv(3 * static_cast<Eigen::Index>(i) + 2) += fa.e_l;
  }

  // Flux-noise slope at the plateau.
  {
    const double slope_bar = pd_bar * tau * k.c_f * 4.0 * kPi * kPi * 1e9 * 2.0 * slope;
    gv(5) += slope_bar * slope / p.q2.e_l;
    const double phi_bar_explicit = slope_bar * p.q2.e_l * (v1.squaredNorm() - v0.squaredNorm());
    RealMatrix v_bar(v0.size(), 2);
    v_bar.col(0) = -2.0 * slope_bar * p.q2.e_l * x_plateau.cwiseProduct(v0);
    v_bar.col(1) = 2.0 * slope_bar * p.q2.e_l * x_plateau.cwiseProduct(v1);
    const RealMatrix h_bar = diffkit::eigh_vjp(plateau, diffkit::SpectrumAdjoint<double>{RealVector(), v_bar});
    const auto fa = circuits::fluxonium_hamiltonian_vjp(h_bar, p.q2, phi_plateau, ops);
    gv(3) += fa.e_c;
    gv(4) += fa.e_j;
    gv(5) += fa.e_l;
    gv(9) += fa.phi_ext + phi_bar_explicit;
  }

  report.gradient = std::move(g);
  return report;
}

ObjectiveReport robust_objective(const IswapParams& p, const std::vector<ControlParams>& deltas,
                                 const IswapSettings& s, bool with_gradient) {
  if (deltas.empty()) throw ValidationError("robust_objective: no samples");
  const double w = 1.0 / static_cast<double>(deltas.size());
  ObjectiveReport out;
  if (with_gradient) out.gradient = diffkit::Gradient::zeros(p.to_vector());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    IswapParams q = p;
    q.control.t_ramp += deltas[i].t_ramp;
    q.control.t_plateau += deltas[i].t_plateau;
    q.control.phi_p += deltas[i].phi_p;
    const auto r = iswap_objective(q, s, with_gradient);
    out.value += w * r.value;
    out.terms["sample_" + std::to_string(i)] = w * r.value;
    out.diagnostics["leakage_" + std::to_string(i)] = r.diagnostics.at("leakage");
    out.diagnostics["fidelity_" + std::to_string(i)] = r.terms.at("fidelity");
    if (with_gradient) out.gradient.values += w * r.gradient.values;
  }
  return out;
}

}  // namespace codesign::objectives
