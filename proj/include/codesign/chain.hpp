#pragma once

#include <string>
#include <vector>

#include "codesign/circuits.hpp"
#include "codesign/diffkit.hpp"

namespace codesign::harness {

/// Open chain of capacitively coupled fluxonium qubits at their sweet spots,
/// H = sum_i H_i' + sum_i J_i n_i' n_{i+1}' on the lowest `levels` states of
/// every site.
struct ChainConfig {
  int n_fm = 3;
  int levels = 0;  ///< 0 picks 5, or 4 for six sites
  circuits::FluxoniumParams site{1.483, 2.082, 0.626};
  double j_c = 0.143;
  circuits::PhaseGrid grid;
  int repeats = 5;
  int warmup = 1;

  int effective_levels() const;
  void validate() const;
};

struct ChainParams {
  std::vector<circuits::FluxoniumParams> sites;
  std::vector<double> couplings;  ///< n_fm - 1 bonds

  static ChainParams uniform(const ChainConfig& cfg);
  /// site<i>.e_c, site<i>.e_j, site<i>.e_l for every site, then bond<i>.j_c.
  diffkit::ParamVector to_vector() const;
  static ChainParams from_vector(const diffkit::ParamVector& v, int n_fm);
};

struct ChainResult {
  double ground_energy = 0.0;  // GHz
  diffkit::Gradient gradient;  ///< empty unless requested
};

/// Lowest eigenvalue of the chain, optionally with its gradient with respect
/// to every site energy and coupling.
ChainResult chain_ground_energy(const ChainParams& p, int levels, const circuits::PhaseGrid& grid,
                                bool with_gradient);

struct TimingStats {
  double median = 0.0;  // s
  double min = 0.0;
  double max = 0.0;
};

struct BenchReport {
  int n_fm = 0;
  int levels = 0;
  long dimension = 0;
  int n_params = 0;
  double ground_energy = 0.0;
  TimingStats value_time;
  TimingStats gradient_time;  ///< value and gradient together
  double ratio = 0.0;         ///< gradient_time.median / value_time.median
  double speedup = 0.0;       ///< (n_params + 1) / ratio, against one-sided finite differences
  double gradcheck_max_rel_error = 0.0;
  bool gradcheck_pass = false;
};

/// Checks the gradient against central differences (rel_tol 1e-5, relative
/// step 1e-4) and then
/// times value and value+gradient: `warmup` untimed runs, median of `repeats`.
/// Timing is skipped (ratio 0) if the check fails.
BenchReport bench_diag_chain(const ChainConfig& cfg);

}  // namespace codesign::harness
