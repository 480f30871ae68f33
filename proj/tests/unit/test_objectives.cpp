#include <array>
#include <complex>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace codesign;
using namespace codesign::objectives;

namespace {

using C = std::complex<double>;

// Phase compensation and average fidelity written out symbol by symbol with
// plain arrays.
double brute_force_fidelity(const ComplexMatrix& u) {
  std::array<std::array<C, 4>, 4> a{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a[r][c] = u(r, c);
  }
  const double p00 = std::arg(a[0][0]);
  const double p21 = std::arg(a[2][1]);
  const double p12 = std::arg(a[1][2]);
  const C i(0.0, 1.0);
  const std::array<C, 4> d = {std::exp(-i * p00), i * std::exp(-i * p21), i * std::exp(-i * p12),
                              -std::exp(-i * (p12 + p21 - p00))};
  // iSWAP: |00> -> |00>, |01> -> i|10>, |10> -> i|01>, |11> -> |11>.
  std::array<std::array<C, 4>, 4> t{};
  t[0][0] = 1.0;
  t[1][2] = i;
  t[2][1] = i;
  t[3][3] = 1.0;
  C trace = 0.0;
  for (int r = 0; r < 4; ++r) {
    for (int k = 0; k < 4; ++k) trace += a[r][k] * d[k] * std::conj(t[r][k]);
  }
  return (std::norm(trace) + 4.0) / 20.0;
}

ComplexMatrix z_phases(double a, double b, double c) {
  ComplexMatrix z = ComplexMatrix::Zero(4, 4);
  z(0, 0) = std::exp(C(0, a));
  z(1, 1) = std::exp(C(0, b));
  z(2, 2) = std::exp(C(0, c));
  z(3, 3) = std::exp(C(0, b + c - a));
  return z;
}

struct OracleQubit {
  RealVector values;
  RealMatrix vectors;
  RealVector phi;
};

OracleQubit oracle_qubit(const circuits::FluxoniumParams& p, double phi_ext) {
  const int n = 400;
  const double lo = -5 * circuits::kPi;
  const double h = 10 * circuits::kPi / (n - 1);
  RealMatrix hm(n, n);
  RealVector phi(n);
  for (int r = 0; r < n; ++r) {
    phi(r) = lo + r * h;
    for (int c = 0; c < n; ++c) {
      const int d = r - c;
      const double k = d == 0 ? circuits::kPi * circuits::kPi / 3.0 : 2.0 * ((d % 2 == 0) ? 1.0 : -1.0) / (d * d);
      hm(r, c) = 4.0 * p.e_c * k / (h * h);
    }
    hm(r, r) += 0.5 * p.e_l * (phi(r) + phi_ext) * (phi(r) + phi_ext) - p.e_j * std::cos(phi(r));
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(hm);
  return {es.eigenvalues(), es.eigenvectors(), phi};
}

}  // namespace

TEST(Fidelity, ExactTargetAndCompensatedPhases) {
  const ComplexMatrix t = iswap_target();
  EXPECT_NEAR(compensated_fidelity(t, t), 1.0, 1e-15);
  ComplexMatrix z1 = ComplexMatrix::Identity(2, 2);
  z1(1, 1) = std::exp(C(0, 0.3));
  ComplexMatrix z2 = ComplexMatrix::Identity(2, 2);
  z2(1, 1) = std::exp(C(0, -1.1));
  const ComplexMatrix u = kron<cplx>(z1, z2) * t;
  EXPECT_NEAR(compensated_fidelity(u, t), 1.0, 1e-12);
}

TEST(Fidelity, MatchesLiteralTranscription) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix u = testing_support::random_unitary(4, rng);
    const double f = compensated_fidelity(u, iswap_target());
    EXPECT_NEAR(f, brute_force_fidelity(u), 1e-12);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(Fidelity, InvariantUnderSingleQubitZPhases) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix u = testing_support::random_unitary(4, rng);
    const ComplexMatrix z = z_phases(ang(rng), ang(rng), ang(rng));
    EXPECT_NEAR(compensated_fidelity(z * u, iswap_target()), compensated_fidelity(u, iswap_target()), 1e-12);
  }
}

TEST(Fidelity, UndefinedPhaseRaises) {
  EXPECT_THROW(compensated_fidelity(ComplexMatrix::Identity(4, 4), iswap_target()), UndefinedPhaseError);
}

TEST(Fidelity, VjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(33);
  const ComplexMatrix u = testing_support::random_unitary(4, rng);
  const ComplexMatrix t = iswap_target();
  const ComplexMatrix bar = compensated_fidelity_vjp(u, t, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    ComplexMatrix d = ComplexMatrix::Random(4, 4);
    const double fd = (compensated_fidelity(u + h * d, t) - compensated_fidelity(u - h * d, t)) / (2 * h);
    EXPECT_NEAR((bar.adjoint() * d).trace().real(), fd, 1e-7);
  }
}

TEST(Decoherence, ThermalEnergyConversion) {
  EXPECT_NEAR(circuits::PhysicalConstants{}.kT_over_h(), 1.0416, 3e-4);
}

TEST(Decoherence, FluxNoiseScaling) {
  const circuits::PhysicalConstants k;
  EXPECT_EQ(flux_noise_rate(0.0, k), 0.0);
  EXPECT_NEAR(flux_noise_rate(0.3, k), 9.0 * flux_noise_rate(0.1, k), 1e-15 * flux_noise_rate(0.3, k));
  const QubitLossInputs q{0.5, 1.4, 1.1};
  EXPECT_EQ(decoherence_penalty(q, q, 0.0, 10.0, k), 10.0 * dielectric_rate(0.5, 1.4, 1.1, k));
}

TEST(Decoherence, DielectricGradient) {
  const circuits::PhysicalConstants k;
  const auto g = dielectric_rate_grad(0.61, 1.4, 0.9, k);
  const double h = 1e-6;
  EXPECT_NEAR(g.d_f01, (dielectric_rate(0.61 + h, 1.4, 0.9, k) - dielectric_rate(0.61 - h, 1.4, 0.9, k)) / (2 * h),
              1e-6 * std::abs(g.d_f01));
  EXPECT_NEAR(g.d_e_c, (dielectric_rate(0.61, 1.4 + h, 0.9, k) - dielectric_rate(0.61, 1.4 - h, 0.9, k)) / (2 * h),
              1e-6 * std::abs(g.d_e_c));
  EXPECT_NEAR(g.d_phi01, (dielectric_rate(0.61, 1.4, 0.9 + h, k) - dielectric_rate(0.61, 1.4, 0.9 - h, k)) / (2 * h),
              1e-6 * std::abs(g.d_phi01));
}

TEST(IswapObjective, DecoherenceMatchesTranscription) {
  const auto p = testing_support::iswap_normal();
  const auto r = iswap_objective(p, IswapSettings{}, false);

  const double pi = circuits::kPi;
  const double kt = 1.380649e-23 * 0.050 / 6.62607015e-34 * 1e-9;
  auto gamma_d = [&](const circuits::FluxoniumParams& q) {
    const auto o = oracle_qubit(q, pi);
    const double f = o.values(1) - o.values(0);
    const double m = o.vectors.col(0).dot(o.phi.cwiseProduct(o.vectors.col(1)));
    return pi * f * f / (2.0 * q.e_c) * m * m * 2e-6 / std::tanh(f / (2.0 * kt));
  };
  const auto plateau = oracle_qubit(p.q2, pi + p.control.phi_p);
  const RealVector x = plateau.phi.array() + pi + p.control.phi_p;
  const RealVector v0 = plateau.vectors.col(0);
  const RealVector v1 = plateau.vectors.col(1);
  const double slope = p.q2.e_l * (v1.dot(x.cwiseProduct(v1)) - v0.dot(x.cwiseProduct(v0)));
  const double gamma_f = 3.95e-15 * std::pow(2.0 * pi * 1e9 * slope, 2) * 1e-9;
  const double tau = 2 * p.control.t_ramp + p.control.t_plateau;
  const double expected = tau * (gamma_d(p.q1) / 2.0 + gamma_d(p.q2) / 2.0 + gamma_f);
  EXPECT_NEAR(r.term("p_decoh") / expected, 1.0, 1e-10);
}

TEST(IswapObjective, PenaltiesVanishInsideBounds) {
  auto p = testing_support::iswap_normal();
  p.q1.e_j = 2.2;
  p.q2.e_j = 2.2;
  p.q2.e_l = 0.9;
  const auto r = iswap_objective(p, IswapSettings{}, false);
  EXPECT_EQ(r.term("p_fm"), 0.0);
  EXPECT_GT(std::abs(r.diagnostics.at("e01_1") - r.diagnostics.at("e01_2")), 0.1);
  EXPECT_EQ(r.term("p_fdiff"), 0.0);
}

TEST(IswapObjective, NormalBeatsInitialAndReportIsConsistent) {
  const auto a = iswap_objective(testing_support::iswap_initial(), IswapSettings{}, false);
  const auto b = iswap_objective(testing_support::iswap_normal(), IswapSettings{}, false);
  EXPECT_LT(b.value, a.value);
  EXPECT_NEAR(a.recompute(), a.value, 1e-12);
  EXPECT_NEAR(b.recompute(), b.value, 1e-12);
  EXPECT_LT(b.diagnostics.at("leakage"), 1e-4);
}

TEST(IswapObjective, GradientPassesCheckAtNormalPoint) {
  const auto p = testing_support::iswap_normal();
  const auto s = IswapSettings{};
  diffkit::FiniteDiffOptions fd;
  fd.threads = diffkit::thread_budget();
  const auto check = diffkit::check_gradient(
      [&](const diffkit::ParamVector& v) { return iswap_objective(IswapParams::from_vector(v), s, false).value; },
      [&](const diffkit::ParamVector& v) { return iswap_objective(IswapParams::from_vector(v), s, true).gradient; },
      p.to_vector(), 1e-4, 1e-8, fd);
  for (const auto& c : check.components) EXPECT_TRUE(c.pass) << c.name << " " << c.rel_error;
}

TEST(RobustObjective, SingleZeroDeltaEqualsPlainObjective) {
  const auto p = testing_support::iswap_initial();
  const auto a = iswap_objective(p, IswapSettings{}, false);
  const auto b = robust_objective(p, {circuits::ControlParams{0.0, 0.0, 0.0}}, IswapSettings{}, false);
  EXPECT_EQ(a.value, b.value);
  EXPECT_THROW(robust_objective(p, {}, IswapSettings{}, false), ValidationError);
}

TEST(RobustObjective, MeanBoundAndGradientIsMeanOfSamples) {
  auto p = testing_support::iswap_robust();
  const auto s = IswapSettings{};
  const double d = 0.005;
  const auto r = robust_objective(p, phi_p_deltas(d), s, true);
  auto shifted = [&](double dp) {
    auto q = p;
    q.control.phi_p += dp;
    return iswap_objective(q, s, true);
  };
  const auto up = shifted(d);
  const auto dn = shifted(-d);
  EXPECT_GE(r.value, std::min(up.value, dn.value));
  EXPECT_NEAR(r.value, 0.5 * (up.value + dn.value), 1e-12);
  EXPECT_LT((r.gradient.values - 0.5 * (up.gradient.values + dn.gradient.values)).cwiseAbs().maxCoeff(), 1e-12);

  // Finite differences on the control parameters and the coupling.
  const auto base = p.to_vector();
  for (const char* name : {"j_c", "t_ramp", "phi_p"}) {
    const std::size_t i = base.index_of(name);
    const double h = 1e-6 * std::max(1.0, std::abs(base.value(i)));
    auto at = [&](double dx) {
      auto v = base;
      v.value(i) += dx;
      return robust_objective(IswapParams::from_vector(v), phi_p_deltas(d), s, false).value;
    };
    const double fd = (at(h) - at(-h)) / (2 * h);
    EXPECT_NEAR(r.gradient[name], fd, 1e-4 * std::abs(fd) + 1e-8) << name;
  }
}

// ---------------------------------------------------------------------------
// CPhase.

namespace {

ChipParams calibrated_chip() {
  auto c = testing_support::chip_before();
  c.hm.value = 0.2381;
  c.ml.value = 0.297543;
  return c;
}

}  // namespace

TEST(CphaseObjective, ChargeDispersionPenaltyCutoff) {
  auto pair = calibrated_chip().hm_pair();
  pair.tuned = {0.35, 21.0};  // E_J / E_C = 60
  const auto r = cphase_pair_objective(pair, {}, false);
  EXPECT_EQ(r.term("p_tm_tuned"), 0.0);
}

TEST(CphaseObjective, WeakIdleCouplingHasNoIdlePenalty) {
  auto pair = calibrated_chip().hm_pair();
  pair.coupling.value = spectral::calibrate_coupling(pair, 5e-5);
  const auto r = cphase_pair_objective(pair, {}, false);
  EXPECT_NEAR(r.diagnostics.at("e_zz_idle"), 5e-5, 1e-10);
  EXPECT_EQ(r.term("p_zz_idle"), 0.0);
}

TEST(CphaseObjective, AfterValuesSatisfyChargeDispersionBound) {
  const auto chip = testing_support::chip_after(calibrated_chip());
  const auto r = chip_objective(chip, {}, false);
  EXPECT_EQ(r.term("hm.p_tm_tuned"), 0.0);
  EXPECT_EQ(r.term("hm.p_tm_fixed"), 0.0);
  EXPECT_EQ(r.term("ml.p_tm_tuned"), 0.0);
  EXPECT_EQ(r.term("ml.p_tm_fixed"), 0.0);
}

TEST(CphaseObjective, GateTermForms) {
  const auto pair = calibrated_chip().hm_pair();
  CphaseSettings lit;
  lit.constants.gate_form = GateTermForm::Literal;
  const auto a = cphase_pair_objective(pair, {}, false);
  const auto b = cphase_pair_objective(pair, lit, false);
  const double e = a.diagnostics.at("e_zz_gate");
  const double pd = a.diagnostics.at("p_decoh");
  EXPECT_NEAR(a.term("gate_term"), pd / (3000.0 * e), 1e-15);
  EXPECT_NEAR(b.term("gate_term"), e / pd * 3000.0, 1e-12);
}

TEST(ChipObjective, SumOfPairsWhenMiddlePenaltiesVanish) {
  auto chip = calibrated_chip();
  chip.mid = {0.31, 16.5};  // E_C >= 0.3 GHz and E_J / E_C >= 50
  const auto r = chip_objective(chip, {}, false);
  ASSERT_EQ(r.term("m_counted_twice"), 0.0);
  const auto hm = cphase_pair_objective(chip.hm_pair(), {}, false);
  const auto ml = cphase_pair_objective(chip.ml_pair(), {}, false);
  EXPECT_NEAR(r.value, hm.value + ml.value, 1e-12 * std::abs(r.value));
}

TEST(ChipObjective, MiddlePenaltiesCountedOnce) {
  const auto chip = calibrated_chip();
  const auto r = chip_objective(chip, {}, false);
  const double pen_m = r.term("hm.p_tm_fixed") + r.term("hm.p_ah_fixed");
  EXPECT_GT(pen_m, 0.0);
  EXPECT_EQ(r.term("ml.p_tm_tuned") + r.term("ml.p_ah_tuned"), pen_m);
  EXPECT_NEAR(r.term("m_counted_twice"), -pen_m, 1e-15);
}

TEST(ChipObjective, GradientMatchesFiniteDifferences) {
  const auto chip = calibrated_chip();
  const CphaseSettings s;
  const auto check = diffkit::check_gradient(
      [&](const diffkit::ParamVector& v) { return chip_objective(chip.with_vector(v), s, false).value; },
      [&](const diffkit::ParamVector& v) { return chip_objective(chip.with_vector(v), s, true).gradient; },
      chip.to_vector(), 1e-4, 1e-8);
  for (const auto& c : check.components) EXPECT_TRUE(c.pass) << c.name << " " << c.rel_error;
}

TEST(ChipObjective, MirroredChipHasNoMiddleLowCrossing) {
  // H is tuned in its pair and L is not, so H = L is not a symmetry: the tuned
  // M sits below L and its levels never approach L's.
  auto chip = calibrated_chip();
  chip.low = chip.high;
  chip.ml = chip.hm;
  EXPECT_NO_THROW(cphase_pair_objective(chip.hm_pair(), {}, false));
  EXPECT_THROW(chip_objective(chip, {}, true), NoCrossingError);
}
