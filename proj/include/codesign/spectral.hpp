#pragma once

#include <array>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "codesign/circuits.hpp"
#include "codesign/diffkit.hpp"
#include "codesign/errors.hpp"
#include "codesign/spectrum.hpp"

namespace codesign::spectral {

inline constexpr double kAssignmentTieTolerance = 1e-9;

/// For every basis index in `bare`, the eigenvector column with the largest
/// squared overlap. Throws AssignmentTieError on near-ties or when two bare
/// states pick the same column.
template <typename Scalar>
std::vector<Eigen::Index> max_overlap_assignment(const Matrix<Scalar>& vectors,
                                                 const std::vector<Eigen::Index>& bare) {
  std::vector<Eigen::Index> out;
  out.reserve(bare.size());
  for (Eigen::Index b : bare) {
    Eigen::Index best = 0;
    double top = -1.0;
    double second = -1.0;
    for (Eigen::Index i = 0; i < vectors.cols(); ++i) {
      const double w = std::norm(vectors(b, i));
      if (w > top) {
        second = top;
        top = w;
        best = i;
      } else if (w > second) {
        second = w;
      }
    }
    if (top - second < kAssignmentTieTolerance) {
      throw AssignmentTieError("two eigenstates tie in overlap with bare state " + std::to_string(b));
    }
    for (Eigen::Index prev : out) {
      if (prev == best) throw AssignmentTieError("max-overlap assignment is not a bijection");
    }
    out.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flux-tunable transmon pairs.

/// How the capacitive coupling of a pair depends on the device energies.
struct CouplingLaw {
  enum class Kind {
    Fixed,       ///< J_C = value
    Capacitive,  ///< J_C = value * E_C,1 * E_C,2 (fixed coupling capacitance)
  };
  Kind kind = Kind::Fixed;
  double value = 0.0;

  double strength(double e_c1, double e_c2) const {
    return kind == Kind::Fixed ? value : value * e_c1 * e_c2;
  }
};

/// Two capacitively coupled transmons. The first is flux-tuned, the second
/// sits at zero flux.
struct TransmonPair {
  circuits::TransmonParams tuned;
  circuits::TransmonParams fixed;
  CouplingLaw coupling;
  int levels = 6;
  int charge_cutoff = circuits::kDefaultChargeCutoff;
};

/// Parameter order used by the pair gradients.
std::vector<std::string> pair_param_names();
diffkit::ParamVector pair_params(const TransmonPair& pair);
TransmonPair pair_from_params(const TransmonPair& base, const diffkit::ParamVector& params);

/// Everything the forward evaluation at one flux produced.
struct PairState {
  double phi_ext = 0.0;
  std::vector<circuits::Subsystem> subsystems;
  circuits::CoupledSystemBuild build;
  RealSpectrum spectrum;                ///< coupled spectrum
  std::array<Eigen::Index, 4> bare{};   ///< product indices of |00>,|01>,|10>,|11>
  std::array<Eigen::Index, 4> dressed{};///< assigned eigenindices, same order
};

PairState evaluate_pair(const TransmonPair& pair, double phi_ext);

struct BareOverlapMetric {
  double value = 0.0;
  Eigen::Index argmin_index = 0;  ///< eigenindex attaining the minimum
};

/// min over the four assigned eigenstates of the summed squared overlap with
/// the four computational bare states.
BareOverlapMetric bare_overlap_metric(const PairState& state);
BareOverlapMetric bare_overlap_metric(const TransmonPair& pair, double phi_ext);

/// |E_00 + E_11 - E_01 - E_10| in GHz.
double e_zz(const PairState& state);
double e_zz(const TransmonPair& pair, double phi_ext);

/// Cotangents with respect to the pair parameters and the flux.
struct PairAdjoint {
  double tuned_e_c = 0.0;
  double tuned_e_j = 0.0;
  double fixed_e_c = 0.0;
  double fixed_e_j = 0.0;
  double coupling = 0.0;  ///< d/d CouplingLaw::value
  double phi_ext = 0.0;

  RealVector params() const;  ///< in pair_param_names() order
  PairAdjoint& operator+=(const PairAdjoint& o);
  PairAdjoint operator*(double s) const;
};

/// Pulls cotangents of the coupled spectrum back to the pair parameters.
PairAdjoint pair_vjp(const TransmonPair& pair, const PairState& state, const RealVector& energies_bar,
                     const RealMatrix& vectors_bar);

PairAdjoint e_zz_vjp(const TransmonPair& pair, const PairState& state);
/// Gradient of the metric with the minimizing eigenindex held fixed.
PairAdjoint metric_vjp(const TransmonPair& pair, const PairState& state, Eigen::Index argmin_index);

/// Lowest transition frequency E_1 - E_0 of a single transmon and its gradient
/// (e_c, e_j, phi_ext).
struct TransitionFrequency {
  double value = 0.0;
  double d_e_c = 0.0;
  double d_e_j = 0.0;
  double d_phi = 0.0;
};
TransitionFrequency transmon_e01(const circuits::TransmonParams& p, double phi_ext,
                                 int charge_cutoff = circuits::kDefaultChargeCutoff);

// ---------------------------------------------------------------------------
// Operating point.

struct SearchConfig {
  double threshold = 0.8;  ///< M
  double step = 0.01;      ///< coarse flux step, rad
  double phi_max = circuits::kPi;
  double tolerance = 1e-9; ///< |metric - M| at the returned point
};

/// Marches phi = 0, step, 2 step, ... (strictly below phi_max) until
/// metric(phi) < M, then bisects the last bracket. Throws ValidationError if
/// metric(0) <= M, NoCrossingError if no crossing is found and SolverFailure
/// if bisection cannot meet the tolerance.
double find_threshold_crossing(const std::function<double(double)>& metric, const SearchConfig& cfg);

struct OperatingPoint {
  double phi_ext_stop = 0.0;
  double metric_at_stop = 0.0;
  Eigen::Index argmin_index = 0;
  std::map<std::pair<int, int>, Eigen::Index> computational_assignment;
};

OperatingPoint find_operating_point(const TransmonPair& pair, const SearchConfig& cfg = {});

/// -g_p / g_phi. Throws IllConditionedRootError if |g_phi| < 1e-12.
RealVector implicit_gradient(double g_phi, const RealVector& g_p);

/// d phi_stop / d (pair parameters), argmin frozen at the root.
PairAdjoint operating_point_gradient(const TransmonPair& pair, const OperatingPoint& op);

/// Same, laid out on `params`; names outside pair_param_names() get 0.
diffkit::Gradient operating_point_gradient(const TransmonPair& pair, const OperatingPoint& op,
                                           const diffkit::ParamVector& params);

/// CouplingLaw::value giving the requested idle E_ZZ. The search brackets
/// J_C in [j_lo, j_hi] GHz.
double calibrate_coupling(const TransmonPair& pair, double target_idle_e_zz, double j_lo = 1e-4,
                          double j_hi = 0.2);

}  // namespace codesign::spectral
