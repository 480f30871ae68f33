#pragma once

#include <map>
#include <optional>
#include <vector>

#include "codesign/linalg.hpp"
#include "codesign/spectrum.hpp"
#include "codesign/waveform.hpp"

namespace codesign::circuits {

inline constexpr double kPi = 3.14159265358979323846;

struct FluxoniumParams {
  double e_c = 0.0;  // GHz
  double e_j = 0.0;  // GHz
  double e_l = 0.0;  // GHz

  void validate() const;
};

struct TransmonParams {
  double e_c = 0.0;  // GHz
  double e_j = 0.0;  // GHz

  void validate() const;
};

/// Trapezoid flux pulse: ramp up, hold, ramp down.
struct ControlParams {
  double t_ramp = 0.0;     // ns
  double t_plateau = 0.0;  // ns
  double phi_p = 0.0;      // rad

  void validate() const;
  double gate_time() const { return 2.0 * t_ramp + t_plateau; }
};

/// Uniform phase grid with hard walls at both ends.
struct PhaseGrid {
  double phi_min = -5.0 * kPi;
  double phi_max = 5.0 * kPi;
  int n_basis = 400;

  void validate() const;
  double spacing() const { return (phi_max - phi_min) / (n_basis - 1); }
  RealVector points() const;
};

struct PhysicalConstants {
  double tan_delta_c = 2e-6;
  double temperature = 0.050;  // K
  double c_f = 3.95e-15;       // s

  /// k_B T / h in GHz.
  double kT_over_h() const;
  void validate() const;
};

/// Phase-space operators on a PhaseGrid, sinc-DVR representation.
///
/// `n_squared` is the DVR form of -d^2/dphi^2 used for the charging term and
/// `derivative` the DVR d/dphi, so that n = -i * derivative.
struct FluxoniumOperators {
  RealVector phi;        ///< diagonal of the phase operator
  RealMatrix n_squared;  ///< real symmetric, positive definite
  RealMatrix derivative; ///< real antisymmetric

  RealMatrix phi_op() const { return phi.asDiagonal(); }
  ComplexMatrix n_op() const { return cplx(0.0, -1.0) * derivative.cast<cplx>(); }
};

/// Throws ValidationError for grids with fewer than 3 points or phi_min >= phi_max.
FluxoniumOperators fluxonium_operators(const PhaseGrid& grid);

/// 4 E_C n^2 + E_L (phi + phi_ext)^2 / 2 - E_J cos(phi), GHz.
RealMatrix fluxonium_hamiltonian(const FluxoniumParams& p, double phi_ext, const PhaseGrid& grid);
RealMatrix fluxonium_hamiltonian(const FluxoniumParams& p, double phi_ext,
                                 const FluxoniumOperators& ops);

struct FluxoniumAdjoint {
  double e_c = 0.0;
  double e_j = 0.0;
  double e_l = 0.0;
  double phi_ext = 0.0;
};

/// Pulls a cotangent of the fluxonium Hamiltonian matrix back to its inputs.
FluxoniumAdjoint fluxonium_hamiltonian_vjp(const RealMatrix& h_bar, const FluxoniumParams& p,
                                           double phi_ext, const FluxoniumOperators& ops);

// ---------------------------------------------------------------------------
// Transmon, charge basis n in {-cutoff, ..., cutoff}, offset charge zero.

inline constexpr int kDefaultChargeCutoff = 12;

double transmon_ej_eff(const TransmonParams& p, double phi_ext);
/// d E_J,eff / d phi_ext; the kink of |cos| at phi_ext = pi gets derivative 0.
double transmon_ej_eff_dphi(const TransmonParams& p, double phi_ext);

/// 4 E_C n^2 - E_J,eff / 2 sum_n (|n><n+1| + h.c.), E_J,eff = E_J |cos(phi_ext / 2)|.
RealMatrix transmon_hamiltonian(const TransmonParams& p, double phi_ext,
                                int charge_cutoff = kDefaultChargeCutoff);
RealMatrix transmon_charge_operator(int charge_cutoff = kDefaultChargeCutoff);

struct TransmonAdjoint {
  double e_c = 0.0;
  double e_j = 0.0;
  double phi_ext = 0.0;
};

TransmonAdjoint transmon_hamiltonian_vjp(const RealMatrix& h_bar, const TransmonParams& p,
                                         double phi_ext);

// ---------------------------------------------------------------------------
// Control pulses.

/// pi + phi_p * min{ReLU(t / t_ramp), 1, ReLU((2 t_ramp + t_plateau - t) / t_ramp)}.
double trapezoid_flux(const ControlParams& c, double t);

/// The time-dependent part of the trapezoid flux, trapezoid_flux(c, t) - pi.
/// Parameters are ordered (t_ramp, t_plateau, phi_p).
class TrapezoidDrive final : public Waveform {
 public:
  explicit TrapezoidDrive(const ControlParams& c);

  std::size_t num_params() const override { return 3; }
  double value(double t) const override;
  double time_derivative(double t, double seg_begin, double seg_end) const override;
  void accumulate_param_grad(double t, double seg_begin, double seg_end, double scale,
                             std::span<double> grad) const override;
  std::vector<Breakpoint> breakpoints() const override;

  const ControlParams& params() const { return c_; }

 private:
  enum class Branch { Zero, Rise, Flat, Fall };
  Branch branch_at(double t) const;

  ControlParams c_;
};

// ---------------------------------------------------------------------------
// Coupled systems in the truncated product basis.

struct Subsystem {
  RealMatrix hamiltonian;                  ///< single-circuit Hamiltonian at its idle bias
  ComplexMatrix coupling_op;               ///< S_i, e.g. the charge operator
  std::optional<ComplexMatrix> control_op; ///< C_i if this subsystem is driven
};

struct Coupling {
  std::size_t first = 0;
  std::size_t second = 1;
  double strength = 0.0;  ///< J_C in GHz
};

/// Drift and control operators projected onto the lowest `levels` eigenstates
/// of every subsystem. Product index = sum_i label_i * stride_i with the first
/// subsystem slowest.
struct TruncatedSystem {
  ComplexMatrix drift;
  std::vector<ComplexMatrix> controls;  ///< in the order of driven subsystems
  std::vector<int> levels;
  std::map<std::vector<int>, Eigen::Index> labels;

  Eigen::Index dimension() const { return drift.rows(); }
  Eigen::Index index_of(const std::vector<int>& label) const;
};

/// Per-subsystem record kept for the reverse pass.
struct SubsystemTruncation {
  spectral::RealSpectrum spectrum;  ///< full single-circuit spectrum
  int levels = 0;
  ComplexMatrix coupling_projected;
  std::optional<ComplexMatrix> control_projected;
};

struct CoupledSystemBuild {
  TruncatedSystem system;
  std::vector<SubsystemTruncation> parts;
  std::vector<Coupling> couplings;
};

/// Diagonalizes every subsystem, keeps `levels` states each and assembles
/// drift = sum_i H_i' + sum_c J_c S_i' (x) S_j'.
/// Throws GaugeAmbiguityError if a kept and a dropped level are degenerate.
CoupledSystemBuild coupled_system(const std::vector<Subsystem>& subsystems,
                                  const std::vector<Coupling>& couplings, int levels);

/// Cotangents of the truncated quantities of one subsystem.
struct SubsystemAdjoint {
  RealVector energies;              ///< cotangent of the kept eigenvalues
  ComplexMatrix coupling_projected; ///< cotangent of S_i'
  ComplexMatrix control_projected;  ///< cotangent of C_i' (empty if undriven)
};

struct CoupledSystemAdjoint {
  std::vector<SubsystemAdjoint> parts;
  std::vector<double> couplings;  ///< d/d J_c
};

/// Reverse pass of the assembly step (not of the diagonalizations).
CoupledSystemAdjoint coupled_system_vjp(const CoupledSystemBuild& build,
                                        const ComplexMatrix& drift_bar,
                                        const std::vector<ComplexMatrix>& controls_bar);

/// Reverse pass of projection and truncation of one subsystem: given cotangents
/// of E_k, P^T S P and P^T C P (P = kept eigenvectors), returns the cotangent of
/// the subsystem Hamiltonian. `extra_vectors_bar` adds any other cotangent on
/// the kept eigenvectors (may be empty).
RealMatrix truncation_vjp(const SubsystemTruncation& part, const ComplexMatrix& coupling_op,
                          const ComplexMatrix* control_op, const SubsystemAdjoint& adjoint,
                          const RealMatrix& extra_vectors_bar = {});

/// Cotangent of P for B = P^T S P given B's cotangent (P real, S complex).
RealMatrix projection_vjp(const RealMatrix& p, const ComplexMatrix& s, const ComplexMatrix& b_bar);

}  // namespace codesign::circuits
