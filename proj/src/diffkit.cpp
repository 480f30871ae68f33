#include "codesign/diffkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <type_traits>

namespace codesign::diffkit {

std::string_view unit_name(Unit unit) {
  switch (unit) {
    case Unit::GHz:
      return "GHz";
    case Unit::ns:
      return "ns";
    case Unit::radian:
      return "rad";
    case Unit::dimensionless:
      return "1";
    case Unit::per_GHz:
      return "1/GHz";
  }
  return "?";
}

ParamVector& ParamVector::add(std::string name, double value, Unit unit) {
  if (contains(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  params_.push_back(Param{std::move(name), value, unit});
  return *this;
}

std::size_t ParamVector::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

bool ParamVector::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Param& p) { return p.name == name; });
}

std::vector<std::string> ParamVector::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

RealVector ParamVector::values() const {
  RealVector out(static_cast<Eigen::Index>(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) out(static_cast<Eigen::Index>(i)) = params_[i].value;
  return out;
}

ParamVector ParamVector::with_values(const RealVector& values) const {
  if (static_cast<std::size_t>(values.size()) != params_.size()) {
    throw ValidationError("with_values: size mismatch");
  }
  ParamVector out = *this;
  for (std::size_t i = 0; i < params_.size(); ++i) out.params_[i].value = values(static_cast<Eigen::Index>(i));
  return out;
}

Gradient Gradient::zeros(const ParamVector& params) {
  return Gradient{params.names(), RealVector::Zero(static_cast<Eigen::Index>(params.size()))};
}

double Gradient::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values(static_cast<Eigen::Index>(i));
  }
  throw ValidationError("gradient has no component '" + std::string(name) + "'");
}

double& Gradient::at(std::string_view name) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values(static_cast<Eigen::Index>(i));
  }
  throw ValidationError("gradient has no component '" + std::string(name) + "'");
}

int thread_budget() {
  if (const char* env = std::getenv("CODESIGN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw EvaluationError("objective returned a non-finite value");
  return v;
}

}  // namespace

Gradient finite_diff_grad(const ScalarFunction& f, const ParamVector& x,
                          const FiniteDiffOptions& options) {
  const std::size_t d = x.size();
  if (!options.steps.empty() && options.steps.size() != d) {
    throw ValidationError("finite_diff_grad: steps size mismatch");
  }
  std::vector<double> h(d);
  for (std::size_t i = 0; i < d; ++i) {
    h[i] = options.steps.empty() ? options.rel_step * std::max(1.0, std::abs(x.value(i)))
                                 : options.steps[i];
  }
  // Probe 2i is +h_i, probe 2i+1 is -h_i.
  auto probe = [&](std::size_t k) {
    ParamVector xp = x;
    const std::size_t i = k / 2;
    xp.value(i) += (k % 2 == 0) ? h[i] : -h[i];
    return checked(f(xp));
  };
  std::vector<double> results(2 * d);
  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (std::size_t k = 0; k < 2 * d; ++k) results[k] = probe(k);
  } else {
    for (std::size_t start = 0; start < 2 * d; start += static_cast<std::size_t>(threads)) {
      std::vector<std::future<double>> batch;
      const std::size_t stop = std::min(2 * d, start + static_cast<std::size_t>(threads));
      for (std::size_t k = start; k < stop; ++k) batch.push_back(std::async(std::launch::async, probe, k));
      for (std::size_t k = start; k < stop; ++k) results[k] = batch[k - start].get();
    }
  }
  Gradient g = Gradient::zeros(x);
  for (std::size_t i = 0; i < d; ++i) {
    g.values(static_cast<Eigen::Index>(i)) = (results[2 * i] - results[2 * i + 1]) / (2.0 * h[i]);
  }
  return g;
}

GradientCheckReport compare_gradients(const Gradient& reverse, const Gradient& finite_diff,
                                      double rel_tol, double abs_floor) {
  if (reverse.names != finite_diff.names) {
    throw ValidationError("compare_gradients: parameter names differ");
  }
  GradientCheckReport report;
  for (std::size_t i = 0; i < reverse.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    ComponentCheck c;
    c.name = reverse.names[i];
    c.reverse = reverse.values(idx);
    c.finite_diff = finite_diff.values(idx);
    const double diff = std::abs(c.reverse - c.finite_diff);
    const double scale = std::max(std::abs(c.reverse), std::abs(c.finite_diff));
    c.rel_error = scale > 0.0 ? diff / scale : 0.0;
    c.pass = std::isfinite(c.reverse) && diff <= rel_tol * scale + abs_floor;
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    report.all_pass = report.all_pass && c.pass;
    report.components.push_back(std::move(c));
  }
  return report;
}

GradientCheckReport check_gradient(const ScalarFunction& f, const GradientFunction& grad_f,
                                   const ParamVector& x, double rel_tol, double abs_floor,
                                   const FiniteDiffOptions& options) {
  return compare_gradients(grad_f(x), finite_diff_grad(f, x, options), rel_tol, abs_floor);
}

template <typename Scalar>
Matrix<Scalar> eigh_vjp(const spectral::BasicSpectrum<Scalar>& spectrum,
                        const SpectrumAdjoint<Scalar>& adjoint, double degeneracy_tol) {
  const Eigen::Index n = spectrum.size();
  const auto& u = spectrum.vectors;
  const auto& d = spectrum.values;
  const Eigen::Index k_val = adjoint.eigenvalues.size();
  const Eigen::Index k_vec = adjoint.eigenvectors.cols();
  if (k_val > n || k_vec > n || (k_vec > 0 && adjoint.eigenvectors.rows() != n)) {
    throw ValidationError("eigh_vjp: adjoint shape does not match spectrum");
  }
  const Eigen::Index k = std::max(k_val, k_vec);
  if (k == 0) return Matrix<Scalar>::Zero(n, n);

  Matrix<Scalar> x = Matrix<Scalar>::Zero(n, k);
  if (k_vec > 0) {
    Matrix<Scalar> g = adjoint.eigenvectors;
    if constexpr (!std::is_same_v<Scalar, double>) {
      // The anchor entry of each column is held real; its phase drift is
      // removed from the parallel-transport differential.
      for (Eigen::Index j = 0; j < k_vec; ++j) {
        const Eigen::Index m = spectral::gauge_anchor(u.col(j));
        const double beta = std::imag(g.col(j).dot(u.col(j)));  // Im sum conj(g) u
        g(m, j) += cplx(0.0, beta) / std::conj(u(m, j));
      }
    }
    const Matrix<Scalar> kmat = u.adjoint() * g;
    for (Eigen::Index j = 0; j < k_vec; ++j) {
      if (g.col(j).squaredNorm() == 0.0) continue;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == j) continue;
        const double gap = d(j) - d(i);
        if (std::abs(gap) < degeneracy_tol) {
          throw DegenerateSpectrumError("eigh_vjp: eigenvalues " + std::to_string(i) + " and " +
                                        std::to_string(j) + " are degenerate within tolerance");
        }
        x(i, j) = kmat(i, j) / gap;
      }
    }
  }
  for (Eigen::Index j = 0; j < k_val; ++j) x(j, j) += adjoint.eigenvalues(j);

  Matrix<Scalar> a = (u * x) * u.leftCols(k).adjoint();
  return 0.5 * (a + a.adjoint());
}

template Matrix<double> eigh_vjp(const spectral::BasicSpectrum<double>&,
                                 const SpectrumAdjoint<double>&, double);
template Matrix<cplx> eigh_vjp(const spectral::BasicSpectrum<cplx>&,
                               const SpectrumAdjoint<cplx>&, double);

}  // namespace codesign::diffkit
