#pragma once

#include <array>
#include <functional>
#include <vector>

#include "codesign/circuits.hpp"
#include "codesign/linalg.hpp"
#include "codesign/waveform.hpp"

namespace codesign::evolution {

struct SolverConfig {
  double dt = 0.002;                  ///< target step, ns; segments use round(length / dt) steps
  double unitarity_check_tol = 1e-6;  ///< SolverFailure above this deviation
  int checkpoint_interval = 100;      ///< steps between stored states in the reverse pass
  bool full_unitary = false;          ///< propagate every column, not only the computational ones
};

/// Drift plus waveform-driven controls: H(t) = drift + sum_k f_k(t) C_k (GHz).
struct ControlledSystem {
  ComplexMatrix drift;
  std::vector<ComplexMatrix> controls;
  std::vector<const Waveform*> waveforms;  ///< one per control
  /// Basis indices whose dressed counterparts span the computational block,
  /// in the order |00>, |01>, |10>, |11>.
  std::array<Eigen::Index, 4> computational{};
};

/// Wraps a truncated two-qubit system; computational labels are (0,0), (0,1), (1,0), (1,1).
ControlledSystem controlled_system(const circuits::TruncatedSystem& system,
                                   const std::vector<const Waveform*>& waveforms);

struct PropagationResult {
  ComplexMatrix u_full;  ///< empty unless SolverConfig::full_unitary
  ComplexMatrix u_comp;  ///< 4x4, rows and columns in the dressed computational basis
  double leakage = 0.0;  ///< 1 - tr(u_comp^H u_comp) / 4
  double gate_time = 0.0;
  double unitarity_deviation = 0.0;  ///< max|Y^H Y - I| over the propagated columns
  std::array<Eigen::Index, 4> dressed{};  ///< eigenindices of the drift for the block
};

/// Integrates i dU/dt = 2 pi H(t) U from U(0) = I to tau with classical RK4.
///
/// The drift is diagonalized first (H0 = W E W^H) and the equation is solved in
/// its interaction picture, which removes the fast dynamical phases. Steps
/// never cross a waveform breakpoint. u_full is the propagator in the input
/// basis; u_comp is its block on the dressed states that overlap most with the
/// computational basis states.
PropagationResult propagate(const ControlledSystem& sys, double tau, const SolverConfig& cfg = {});

struct EvolutionGradient {
  PropagationResult forward;
  ComplexMatrix drift_bar;
  std::vector<ComplexMatrix> controls_bar;
  std::vector<std::vector<double>> waveform_params_bar;  ///< explicit and through breakpoints
  /// Cotangent of tau when no breakpoint coincides with it (otherwise routed
  /// into the waveform parameters of that breakpoint).
  double tau_bar = 0.0;
};

/// Discrete adjoint of propagate for a loss whose cotangent on u_comp is
/// `u_comp_bar` (convention dL = Re tr(u_comp_bar^H du_comp)).
EvolutionGradient propagate_grad(const ControlledSystem& sys, double tau, const SolverConfig& cfg,
                                 const ComplexMatrix& u_comp_bar);

/// Same, with the cotangent computed from the forward result.
using CotangentFn = std::function<ComplexMatrix(const PropagationResult&)>;
EvolutionGradient propagate_grad(const ControlledSystem& sys, double tau, const SolverConfig& cfg,
                                 const CotangentFn& cotangent);

}  // namespace codesign::evolution
