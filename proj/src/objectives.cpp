#include "codesign/objectives.hpp"

#include <cmath>

namespace codesign::objectives {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be positive");
}

constexpr double kTwoPi = 2.0 * circuits::kPi;

}  // namespace

void PenaltyConstants::validate() const {
  iswap.physical.validate();
  require_positive(iswap.delta, "delta");
  require_positive(iswap.c_fdiff, "c_fdiff");
  require_positive(iswap.c_fm1, "c_fm1");
  require_positive(iswap.c_fm2, "c_fm2");
  require_positive(cphase.c_zz1, "c_zz1");
  require_positive(cphase.c_zz2, "c_zz2");
  require_positive(cphase.c_tm, "c_tm");
  require_positive(cphase.c_ah1, "c_ah1");
  require_positive(cphase.c_ah2, "c_ah2");
  require_positive(cphase.c_fdiff1, "c_fdiff1");
  require_positive(cphase.c_fdiff2, "c_fdiff2");
  require_positive(cphase.c_scale, "c_scale");
}

double ObjectiveReport::term(const std::string& name) const {
  const auto it = terms.find(name);
  if (it == terms.end()) throw ValidationError("report has no term '" + name + "'");
  return it->second;
}

double ObjectiveReport::recompute() const {
  if (!logarithmic) {
    double sum = 0.0;
    for (const auto& [name, v] : terms) sum += v;
    return sum;
  }
  double arg = 1.0;
  for (const auto& [name, v] : terms) arg += (name == "fidelity") ? -v : v;
  return std::log(arg);
}

ComplexMatrix iswap_target() {
  ComplexMatrix t = ComplexMatrix::Zero(4, 4);
  t(0, 0) = 1.0;
  t(1, 2) = cplx(0.0, 1.0);
  t(2, 1) = cplx(0.0, 1.0);
  t(3, 3) = 1.0;
  return t;
}

namespace {

constexpr double kPhaseFloor = 1e-12;

struct Compensation {
  std::array<double, 3> phases{};  ///< arg u_00, arg u_21, arg u_12
  std::array<cplx, 4> d{};
  std::array<cplx, 4> c{};  ///< c_k = sum_j u_jk conj(T_jk)
  cplx trace;
};

Compensation compensate(const ComplexMatrix& u, const ComplexMatrix& target) {
  if (u.rows() != 4 || u.cols() != 4 || target.rows() != 4 || target.cols() != 4) {
    throw ValidationError("compensated_fidelity: expected 4x4 matrices");
  }
  if (std::abs(u(0, 0)) < kPhaseFloor || std::abs(u(2, 1)) < kPhaseFloor || std::abs(u(1, 2)) < kPhaseFloor) {
    throw UndefinedPhaseError("compensated_fidelity: phase reference entry vanishes");
  }
  Compensation c;
  const double p00 = std::arg(u(0, 0));
  const double p21 = std::arg(u(2, 1));
  const double p12 = std::arg(u(1, 2));
  c.phases = {p00, p21, p12};
  const cplx i(0.0, 1.0);
  c.d = {std::exp(-i * p00), i * std::exp(-i * p21), i * std::exp(-i * p12),
         -std::exp(-i * (p12 + p21 - p00))};
  c.trace = 0.0;
  for (int k = 0; k < 4; ++k) {
    cplx ck = 0.0;
    for (int j = 0; j < 4; ++j) ck += u(j, k) * std::conj(target(j, k));
    c.c[static_cast<std::size_t>(k)] = ck;
    c.trace += c.d[static_cast<std::size_t>(k)] * ck;
  }
  return c;
}

}  // namespace

double compensated_fidelity(const ComplexMatrix& u_comp, const ComplexMatrix& target) {
  const Compensation c = compensate(u_comp, target);
  return (std::norm(c.trace) + 4.0) / 20.0;
}

ComplexMatrix compensated_fidelity_vjp(const ComplexMatrix& u_comp, const ComplexMatrix& target,
                                       double f_bar) {
  const Compensation c = compensate(u_comp, target);
  const cplx s_bar = f_bar * 2.0 * c.trace / 20.0;
  ComplexMatrix u_bar = ComplexMatrix::Zero(4, 4);
  std::array<double, 4> theta_bar{};
  for (std::size_t k = 0; k < 4; ++k) {
    const cplx c_bar = std::conj(c.d[k]) * s_bar;
    for (int j = 0; j < 4; ++j) u_bar(j, static_cast<int>(k)) += target(j, static_cast<int>(k)) * c_bar;
    const cplx d_bar = std::conj(c.c[k]) * s_bar;
    theta_bar[k] = std::real(std::conj(d_bar) * cplx(0.0, -1.0) * c.d[k]);
  }
  // theta = (p00, p21, p12, p12 + p21 - p00)
  const double p00_bar = theta_bar[0] - theta_bar[3];
  const double p21_bar = theta_bar[1] + theta_bar[3];
  const double p12_bar = theta_bar[2] + theta_bar[3];
  auto arg_vjp = [](cplx z, double bar) { return cplx(0.0, bar) * z / std::norm(z); };
  u_bar(0, 0) += arg_vjp(u_comp(0, 0), p00_bar);
  u_bar(2, 1) += arg_vjp(u_comp(2, 1), p21_bar);
  u_bar(1, 2) += arg_vjp(u_comp(1, 2), p12_bar);
  return u_bar;
}

DielectricRateGrad dielectric_rate_grad(double f01, double e_c, double phi01,
                                        const circuits::PhysicalConstants& k) {
  const double two_kt = 2.0 * k.kT_over_h();
  const double u = f01 / two_kt;
  const double coth = 1.0 / std::tanh(u);
  const double csch2 = coth * coth - 1.0;
  const double pre = circuits::kPi / (2.0 * e_c) * phi01 * phi01 * k.tan_delta_c;
  DielectricRateGrad g;
  g.value = pre * f01 * f01 * coth;
  g.d_f01 = pre * (2.0 * f01 * coth - f01 * f01 * csch2 / two_kt);
  g.d_e_c = -g.value / e_c;
  g.d_phi01 = circuits::kPi / e_c * phi01 * k.tan_delta_c * f01 * f01 * coth;
  return g;
}

double dielectric_rate(double f01, double e_c, double phi01, const circuits::PhysicalConstants& k) {
  return dielectric_rate_grad(f01, e_c, phi01, k).value;
}

double flux_noise_rate(double slope, const circuits::PhysicalConstants& k) {
  // c_f in seconds, slope in GHz/rad: (2 pi 1e9 slope)^2 c_f per second, times 1e-9 per ns.
  return k.c_f * kTwoPi * kTwoPi * 1e9 * slope * slope;
}

double decoherence_penalty(const QubitLossInputs& q1, const QubitLossInputs& q2, double flux_slope,
                           double gate_time, const circuits::PhysicalConstants& k) {
  const double gd = dielectric_rate(q1.f01, q1.e_c, q1.phi01, k) + dielectric_rate(q2.f01, q2.e_c, q2.phi01, k);
  return gate_time * (0.5 * gd + flux_noise_rate(flux_slope, k));
}

}  // namespace codesign::objectives
