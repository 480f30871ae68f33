#pragma once

#include <complex>

#include <Eigen/Dense>

#include "codesign/errors.hpp"

namespace codesign {

using cplx = std::complex<double>;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kHermitianTolerance = 1e-12;

/// max|A - A^H| / max(1, max|A|).
template <typename Derived>
double hermiticity_deviation(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() / scale;
}

template <typename Derived>
void require_hermitian(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw ValidationError(std::string(what) + ": matrix is not square");
  }
  if (hermiticity_deviation(a) > kHermitianTolerance) {
    throw ValidationError(std::string(what) + ": matrix is not Hermitian");
  }
}

/// Kronecker product a (x) b; the first factor is the slow index.
template <typename Scalar>
Matrix<Scalar> kron(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  Matrix<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Re tr(a^H b): the real inner product used to pair cotangents with tangents.
template <typename DA, typename DB>
double real_inner(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return std::real(a.cwiseProduct(b.conjugate()).sum());
}

inline double real_part(double x) { return x; }
inline double real_part(cplx x) { return x.real(); }

}  // namespace codesign
