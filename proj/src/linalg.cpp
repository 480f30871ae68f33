#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <cmath>
#include <cstdio>

#include <Eigen/Eigenvalues>

#include "codesign/spectrum.hpp"

namespace codesign::spectral {

namespace {

template <typename Scalar>
void lapack_eigh(Matrix<Scalar>& v, RealVector& w) {
  const auto n = static_cast<lapack_int>(v.rows());
  lapack_int info = 0;
  if constexpr (std::is_same_v<Scalar, double>) {
    info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, v.data(), n, w.data());
  } else {
    info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, v.data(), n, w.data());
  }
  if (info != 0) throw SolverFailure("eigh: LAPACK eigensolver failed to converge");
}

template <typename Scalar>
double residual(const Matrix<Scalar>& a, const Matrix<Scalar>& v, const RealVector& w) {
  return (a * v - v * w.asDiagonal()).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff());
}

// Some OpenBLAS builds pick a faulty kernel on CPUs they misdetect and
// return wrong eigenvectors for larger matrices. Checked once per process.
bool lapack_is_sound() {
  static const bool ok = [] {
    for (int n : {32, 400}) {
      RealMatrix a(n, n);
      ComplexMatrix c(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
          const double x = std::sin(0.37 * i * j + 0.11 * i + 0.5);
          a(i, j) = a(j, i) = x;
          c(i, j) = cplx(x, i == j ? 0.0 : std::cos(0.23 * i + 0.71 * j));
          c(j, i) = std::conj(c(i, j));
        }
      }
      RealMatrix v = a;
      ComplexMatrix u = c;
      RealVector w(n);
      RealVector wc(n);
      lapack_eigh(v, w);
      lapack_eigh(u, wc);
      if (!(residual(a, v, w) < 1e-9) || !(residual(c, u, wc) < 1e-9)) {
        std::fprintf(stderr,
                     "codesign: LAPACK eigensolver failed its self-check, falling back to Eigen "
                     "(for OpenBLAS, setting OPENBLAS_CORETYPE may restore the fast path)\n");
        return false;
      }
    }
    return true;
  }();
  return ok;
}

template <typename Scalar>
BasicSpectrum<Scalar> eigh_impl(const Matrix<Scalar>& h) {
  require_hermitian(h, "eigh");
  BasicSpectrum<Scalar> out;
  const Matrix<Scalar> sym = 0.5 * (h + h.adjoint());
  const Eigen::Index n = h.rows();
  if (n == 0) {
    out.vectors = sym;
    out.values.resize(0);
    return out;
  }
  if (lapack_is_sound()) {
    out.vectors = sym;
    out.values.resize(n);
    lapack_eigh(out.vectors, out.values);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
    if (es.info() != Eigen::Success) throw SolverFailure("eigh: eigensolver failed to converge");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  fix_gauge(out.vectors);
  return out;
}

}  // namespace

const char* eigh_backend() { return lapack_is_sound() ? "lapack" : "eigen"; }

RealSpectrum eigh(const RealMatrix& h) { return eigh_impl(h); }

Spectrum eigh(const ComplexMatrix& h) { return eigh_impl(h); }

}  // namespace codesign::spectral
