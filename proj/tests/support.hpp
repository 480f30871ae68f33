#pragma once

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "codesign/objectives.hpp"

namespace testing_support {

using namespace codesign;

inline constexpr double kPi = circuits::kPi;

// Parameter tables of the iSWAP study.
inline objectives::IswapParams iswap_initial() {
  return {{1.483, 2.082, 0.626}, {1.381, 2.103, 0.620}, 0.143, {2.31, 32.0, 0.254}};
}
inline objectives::IswapParams iswap_normal() {
  return {{1.492, 2.074, 0.634}, {1.412, 2.050, 0.612}, 0.139, {2.21, 31.14, 0.245}};
}
inline objectives::IswapParams iswap_robust() {
  return {{1.604, 2.101, 0.714}, {1.870, 2.095, 0.532}, 0.207, {1.88, 20.66, 0.293}};
}

// Transmon chip before and after the CPhase optimization.
inline objectives::ChipParams chip_before() {
  objectives::ChipParams c;
  c.high = {0.3, 21.5};
  c.mid = {0.28, 16.5};
  c.low = {0.24, 14.5};
  c.hm = {spectral::CouplingLaw::Kind::Capacitive, 0.0};
  c.ml = {spectral::CouplingLaw::Kind::Capacitive, 0.0};
  return c;
}
inline objectives::ChipParams chip_after(const objectives::ChipParams& calibrated) {
  objectives::ChipParams c = calibrated;
  c.high = {0.437, 21.87};
  c.mid = {0.285, 16.51};
  c.low = {0.257, 14.15};
  return c;
}

template <typename Scalar>
Matrix<Scalar> random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix<Scalar> a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if constexpr (std::is_same_v<Scalar, double>) {
        a(i, j) = g(rng);
      } else {
        a(i, j) = Scalar(g(rng), g(rng));
      }
    }
  }
  return (a + a.adjoint()) / 2.0;
}

inline ComplexMatrix random_unitary(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
  }
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  return qr.householderQ() * ComplexMatrix::Identity(n, n);
}

/// Independent fluxonium spectrum: sinc-DVR kinetic term written out here and
/// Eigen's own solver.
inline RealVector oracle_fluxonium_levels(const circuits::FluxoniumParams& p, double phi_ext, double phi_min,
                                          double phi_max, int n) {
  const double h = (phi_max - phi_min) / (n - 1);
  RealMatrix k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int d = i - j;
      k(i, j) = d == 0 ? kPi * kPi / 3.0 : 2.0 * ((d % 2 == 0) ? 1.0 : -1.0) / (d * d);
    }
  }
  RealMatrix hm = 4.0 * p.e_c * k / (h * h);
  for (int i = 0; i < n; ++i) {
    const double x = phi_min + i * h;
    hm(i, i) += 0.5 * p.e_l * (x + phi_ext) * (x + phi_ext) - p.e_j * std::cos(x);
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(hm, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Build of the coupled iSWAP pair with qubit 2 driven, as the objective does.
inline circuits::CoupledSystemBuild iswap_build(const objectives::IswapParams& p, int levels,
                                                const circuits::PhaseGrid& grid = {}) {
  const auto ops = circuits::fluxonium_operators(grid);
  std::vector<circuits::Subsystem> subs(2);
  subs[0].hamiltonian = circuits::fluxonium_hamiltonian(p.q1, kPi, ops);
  subs[0].coupling_op = ops.n_op();
  subs[1].hamiltonian = circuits::fluxonium_hamiltonian(p.q2, kPi, ops);
  subs[1].coupling_op = ops.n_op();
  const RealVector x = ops.phi.array() + kPi;
  subs[1].control_op = ComplexMatrix((p.q2.e_l * x).cast<cplx>().asDiagonal());
  return circuits::coupled_system(subs, {circuits::Coupling{0, 1, p.j_c}}, levels);
}

}  // namespace testing_support
