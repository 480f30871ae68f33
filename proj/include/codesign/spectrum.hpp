#pragma once

#include "codesign/linalg.hpp"

namespace codesign::spectral {

/// Eigenvalues in ascending order and the matching eigenvectors as columns.
///
/// Gauge: in every column the first entry whose magnitude is within 1e-8
/// (relative) of the column maximum is real and positive. The tolerance makes
/// the choice stable for parity-symmetric eigenvectors whose two largest
/// entries are equal in exact arithmetic.
template <typename Scalar>
struct BasicSpectrum {
  RealVector values;
  Matrix<Scalar> vectors;

  Eigen::Index size() const { return values.size(); }
};

using Spectrum = BasicSpectrum<cplx>;
using RealSpectrum = BasicSpectrum<double>;

/// Index of the gauge-anchor entry of a column.
template <typename Derived>
Eigen::Index gauge_anchor(const Eigen::MatrixBase<Derived>& column) {
  const double top = column.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    if (std::abs(column(i)) >= top * (1.0 - 1e-8)) return i;
  }
  return 0;
}

template <typename Scalar>
void fix_gauge(Matrix<Scalar>& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    const Eigen::Index m = gauge_anchor(vectors.col(k));
    const Scalar anchor = vectors(m, k);
    if (std::abs(anchor) == 0.0) continue;
    vectors.col(k) *= std::abs(anchor) / anchor;
    vectors(m, k) = std::abs(anchor);
  }
}

/// Hermitian eigendecomposition (LAPACK divide and conquer), gauge fixed.
/// Throws ValidationError for non-Hermitian input.
RealSpectrum eigh(const RealMatrix& h);
Spectrum eigh(const ComplexMatrix& h);

/// "lapack", or "eigen" when the LAPACK library failed its self-check.
const char* eigh_backend();

}  // namespace codesign::spectral
