#pragma once

#include <map>
#include <string>
#include <vector>

#include "codesign/circuits.hpp"
#include "codesign/diffkit.hpp"
#include "codesign/evolution.hpp"
#include "codesign/spectral.hpp"

namespace codesign::objectives {

// ---------------------------------------------------------------------------
// Constants.

struct IswapConstants {
  circuits::PhysicalConstants physical;
  double delta = 0.1;    // GHz
  double c_fdiff = 1.0;  // 1/GHz
  double c_fm1 = 0.2;    // 1/GHz^2
  double c_fm2 = 2.1;    // GHz
};

enum class GateTermForm {
  Reciprocal,  ///< P_decoh / (c_scale * E_ZZ): rewards a large gate E_ZZ
  Literal,     ///< E_ZZ / P_decoh * c_scale, as printed
};

struct CphaseConstants {
  double c_zz1 = 8e-6;     // 1/Hz
  double c_zz2 = 1e5;      // Hz
  double c_tm = 50.0;
  double c_ah1 = 300.0;    // 1/GHz^2
  double c_ah2 = 0.3;      // GHz
  double c_fdiff1 = 5e-16; // 1/Hz^2
  double c_fdiff2 = 2e8;   // Hz
  double c_scale = 3000.0;
  GateTermForm gate_form = GateTermForm::Reciprocal;
};

struct PenaltyConstants {
  IswapConstants iswap;
  CphaseConstants cphase;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Reports.

struct ObjectiveReport {
  double value = 0.0;
  /// Additive terms; for the iSWAP objective value = ln(1 - fidelity + sum of
  /// the p_* terms), for CPhase objectives value = sum of all terms.
  std::map<std::string, double> terms;
  /// Quantities that are not part of the formula (leakage, E_ZZ, ...).
  std::map<std::string, double> diagnostics;
  diffkit::Gradient gradient;  ///< empty unless requested

  double term(const std::string& name) const;
  /// Recomputes the objective from `terms`.
  double recompute() const;
  bool logarithmic = false;
};

// ---------------------------------------------------------------------------
// Fidelity.

ComplexMatrix iswap_target();

/// Average gate fidelity of u_comp after compensating single-qubit Z phases,
/// (|tr(u D T^H)|^2 + 4) / 20 with D built from the phases of u_00, u_21 and
/// u_12. Throws UndefinedPhaseError if one of those entries vanishes.
double compensated_fidelity(const ComplexMatrix& u_comp, const ComplexMatrix& target);

/// Cotangent of u_comp for a cotangent f_bar of the fidelity.
ComplexMatrix compensated_fidelity_vjp(const ComplexMatrix& u_comp, const ComplexMatrix& target,
                                       double f_bar);

// ---------------------------------------------------------------------------
// Decoherence.

/// Dielectric loss rate in 1/ns: (pi f^2 / 2 E_C) |<0|phi|1>|^2 tan(delta) coth(f / 2 kT).
double dielectric_rate(double f01, double e_c, double phi01, const circuits::PhysicalConstants& k);

struct DielectricRateGrad {
  double value = 0.0;
  double d_f01 = 0.0;
  double d_e_c = 0.0;
  double d_phi01 = 0.0;
};
DielectricRateGrad dielectric_rate_grad(double f01, double e_c, double phi01,
                                        const circuits::PhysicalConstants& k);

/// White flux noise rate in 1/ns: c_f (d omega / d phi_ext)^2 with the slope in GHz/rad.
double flux_noise_rate(double slope, const circuits::PhysicalConstants& k);

struct QubitLossInputs {
  double f01 = 0.0;    // GHz
  double e_c = 0.0;    // GHz
  double phi01 = 0.0;  // <0|phi|1>
};

/// T_gate (Gamma_d,1 / 2 + Gamma_d,2 / 2 + Gamma_f) with Gamma_f from the
/// flux slope of the driven qubit.
double decoherence_penalty(const QubitLossInputs& q1, const QubitLossInputs& q2, double flux_slope,
                           double gate_time, const circuits::PhysicalConstants& k);

// ---------------------------------------------------------------------------
// iSWAP.

struct IswapParams {
  circuits::FluxoniumParams q1;
  circuits::FluxoniumParams q2;
  double j_c = 0.0;
  circuits::ControlParams control;

  static std::vector<std::string> names();
  diffkit::ParamVector to_vector() const;
  static IswapParams from_vector(const diffkit::ParamVector& v);
};

struct IswapSettings {
  circuits::PhaseGrid grid;
  int levels = 5;
  evolution::SolverConfig solver;
  IswapConstants constants;
};

/// ln(1 - F + P_decoh + P_fDiff + P_fm) with qubit 2 flux-driven by the
/// trapezoid pulse around its sweet spot.
ObjectiveReport iswap_objective(const IswapParams& p, const IswapSettings& s, bool with_gradient = true);

/// Mean of iswap_objective over control offsets.
ObjectiveReport robust_objective(const IswapParams& p, const std::vector<circuits::ControlParams>& deltas,
                                 const IswapSettings& s, bool with_gradient = true);

/// Offsets (0, 0, +d) and (0, 0, -d).
std::vector<circuits::ControlParams> phi_p_deltas(double d);

// ---------------------------------------------------------------------------
// CPhase.

struct CphaseSettings {
  CphaseConstants constants;
  spectral::SearchConfig search;
};

/// Gate term at the operating point plus idle-ZZ, charge-dispersion,
/// anharmonicity and frequency-difference penalties. Gradient names follow
/// spectral::pair_param_names().
ObjectiveReport cphase_pair_objective(const spectral::TransmonPair& pair, const CphaseSettings& s,
                                      bool with_gradient = true);

struct ChipParams {
  circuits::TransmonParams high;
  circuits::TransmonParams mid;
  circuits::TransmonParams low;
  spectral::CouplingLaw hm;
  spectral::CouplingLaw ml;
  int levels = 6;
  int charge_cutoff = circuits::kDefaultChargeCutoff;

  static std::vector<std::string> names();
  diffkit::ParamVector to_vector() const;
  ChipParams with_vector(const diffkit::ParamVector& v) const;
  spectral::TransmonPair hm_pair() const;  ///< H tuned, M fixed
  spectral::TransmonPair ml_pair() const;  ///< M tuned, L fixed
};

/// O_H-M + O_M-L - P_tm,M - P_ah,M.
ObjectiveReport chip_objective(const ChipParams& chip, const CphaseSettings& s, bool with_gradient = true);

}  // namespace codesign::objectives
