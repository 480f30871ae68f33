#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "codesign/linalg.hpp"
#include "codesign/spectrum.hpp"

namespace codesign::diffkit {

// ---------------------------------------------------------------------------
// ReLU with a registered derivative. The derivative at exactly zero is a
// convention; this library fixes it to zero.

inline constexpr double kReluDerivativeAtZero = 0.0;

constexpr double relu(double x) { return x > 0.0 ? x : 0.0; }

constexpr double relu_grad(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return 0.0;
  return kReluDerivativeAtZero;
}

// ---------------------------------------------------------------------------
// Named parameter vectors.

enum class Unit { GHz, ns, radian, dimensionless, per_GHz };

std::string_view unit_name(Unit unit);

struct Param {
  std::string name;
  double value = 0.0;
  Unit unit = Unit::dimensionless;
};

/// Ordered list of uniquely named parameters. The order is the order of
/// insertion and is the order of every Gradient produced for it.
class ParamVector {
 public:
  ParamVector() = default;

  ParamVector& add(std::string name, double value, Unit unit);

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }

  const Param& operator[](std::size_t i) const { return params_[i]; }
  double& value(std::size_t i) { return params_[i].value; }
  double value(std::size_t i) const { return params_[i].value; }
  double value(std::string_view name) const { return params_[index_of(name)].value; }
  void set(std::string_view name, double value) { params_[index_of(name)].value = value; }

  /// Throws ValidationError when the name is unknown.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<std::string> names() const;
  RealVector values() const;
  /// Copy with the values replaced; sizes must agree.
  ParamVector with_values(const RealVector& values) const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
};

/// Gradient aligned with a ParamVector.
struct Gradient {
  std::vector<std::string> names;
  RealVector values;

  static Gradient zeros(const ParamVector& params);

  std::size_t size() const { return names.size(); }
  double operator[](std::string_view name) const;
  double& at(std::string_view name);
  bool finite() const { return values.allFinite(); }
};

// ---------------------------------------------------------------------------
// Finite differences.

using ScalarFunction = std::function<double(const ParamVector&)>;
using GradientFunction = std::function<Gradient(const ParamVector&)>;

struct FiniteDiffOptions {
  /// Per-parameter step is rel_step * max(1, |x_i|) unless `steps` is given.
  double rel_step = 1e-6;
  std::vector<double> steps;
  /// Concurrent probe evaluations; results do not depend on this value.
  int threads = 1;
};

/// Central differences (f(x + e_i h_i) - f(x - e_i h_i)) / (2 h_i).
/// Throws EvaluationError if f returns a non-finite value.
Gradient finite_diff_grad(const ScalarFunction& f, const ParamVector& x,
                          const FiniteDiffOptions& options = {});

struct ComponentCheck {
  std::string name;
  double reverse = 0.0;
  double finite_diff = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

struct GradientCheckReport {
  std::vector<ComponentCheck> components;
  double max_rel_error = 0.0;
  bool all_pass = true;
};

/// A component passes if |g_rev - g_fd| <= rel_tol * max(|g_rev|, |g_fd|) + abs_floor.
GradientCheckReport check_gradient(const ScalarFunction& f, const GradientFunction& grad_f,
                                   const ParamVector& x, double rel_tol, double abs_floor,
                                   const FiniteDiffOptions& options = {});

GradientCheckReport compare_gradients(const Gradient& reverse, const Gradient& finite_diff,
                                      double rel_tol, double abs_floor);

// ---------------------------------------------------------------------------
// Eigendecomposition adjoint.

inline constexpr double kDegeneracyTolerance = 1e-9;

/// Cotangents of a spectrum. Either member may cover only the leading
/// columns/entries (or be empty); missing entries are zero.
template <typename Scalar>
struct SpectrumAdjoint {
  RealVector eigenvalues;
  Matrix<Scalar> eigenvectors;
};

/// Cotangent of the input Hermitian matrix given cotangents of its gauge-fixed
/// spectrum. Eigenvalue part: U diag(dD) U^H. Eigenvector part: first-order
/// perturbation theory, U (F o (U^H dU)) U^H with F_ij = 1 / (D_j - D_i),
/// after folding the gauge constraint into the cotangent. Result is Hermitized.
///
/// Throws DegenerateSpectrumError when a column with a nonzero eigenvector
/// cotangent has an eigenvalue gap below `degeneracy_tol`.
template <typename Scalar>
Matrix<Scalar> eigh_vjp(const spectral::BasicSpectrum<Scalar>& spectrum,
                        const SpectrumAdjoint<Scalar>& adjoint,
                        double degeneracy_tol = kDegeneracyTolerance);

extern template Matrix<double> eigh_vjp(const spectral::BasicSpectrum<double>&,
                                        const SpectrumAdjoint<double>&, double);
extern template Matrix<cplx> eigh_vjp(const spectral::BasicSpectrum<cplx>&,
                                      const SpectrumAdjoint<cplx>&, double);

/// Thread cap from the CODESIGN_THREADS environment variable (default 1).
int thread_budget();

}  // namespace codesign::diffkit
