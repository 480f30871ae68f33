#include <gtest/gtest.h>

#include "codesign/optimize.hpp"
#include "support.hpp"

using namespace codesign;
using namespace codesign::diffkit;

namespace {

template <typename Scalar>
double frobenius_inner(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  return real_part((a.adjoint() * b).trace());
}

// Forward differential of the gauge-fixed spectrum along T, written out from
// first-order perturbation theory. The gauge correction keeps every anchor
// entry real.
template <typename Scalar>
std::pair<RealVector, Matrix<Scalar>> spectrum_jvp(const spectral::BasicSpectrum<Scalar>& s,
                                                   const Matrix<Scalar>& t) {
  const Matrix<Scalar> k = s.vectors.adjoint() * t * s.vectors;
  const Eigen::Index n = s.size();
  RealVector d_values(n);
  Matrix<Scalar> fk = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d_values(i) = real_part(k(i, i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) fk(i, j) = k(i, j) / (s.values(j) - s.values(i));
    }
  }
  Matrix<Scalar> d_vectors = s.vectors * fk;
  if constexpr (!std::is_same_v<Scalar, double>) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const Eigen::Index m = spectral::gauge_anchor(s.vectors.col(c));
      const double theta = -d_vectors(m, c).imag() / s.vectors(m, c).real();
      d_vectors.col(c) += cplx(0.0, theta) * s.vectors.col(c);
    }
  }
  return {d_values, d_vectors};
}

}  // namespace

TEST(Relu, Examples) {
  EXPECT_EQ(relu(2.5), 2.5);
  EXPECT_EQ(relu(-1.0), 0.0);
  EXPECT_EQ(relu_grad(-1.0), 0.0);
  EXPECT_EQ(relu(0.0), 0.0);
  EXPECT_EQ(relu_grad(0.0), 0.0);
  EXPECT_EQ(relu_grad(1e-300), 1.0);
  static_assert(kReluDerivativeAtZero == 0.0);
}

TEST(Relu, NonNegativeAndIdempotent) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_GE(relu(x), 0.0);
    EXPECT_EQ(relu(relu(x)), relu(x));
    EXPECT_EQ(relu_grad(x), x > 0.0 ? 1.0 : 0.0);
  }
}

TEST(ParamVector, NamesAreUniqueAndOrdered) {
  ParamVector v;
  v.add("b", 1.0, Unit::GHz).add("a", 2.0, Unit::ns);
  EXPECT_EQ(v.names(), (std::vector<std::string>{"b", "a"}));
  EXPECT_THROW(v.add("a", 3.0, Unit::GHz), ValidationError);
  EXPECT_THROW(v.value("c"), ValidationError);
  const auto w = v.with_values(RealVector::Constant(2, 7.0));
  EXPECT_EQ(w.value("a"), 7.0);
  EXPECT_EQ(w[1].unit, Unit::ns);
}

TEST(EighVjp, DiagonalEigenvalueCotangent) {
  RealMatrix a = RealMatrix::Zero(2, 2);
  a.diagonal() << 1.0, 2.0;
  const auto s = spectral::eigh(a);
  SpectrumAdjoint<double> adj;
  adj.eigenvalues = RealVector::Ones(2);
  const RealMatrix a_bar = eigh_vjp(s, adj);
  EXPECT_LT((a_bar - RealMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EighVjp, WeightedEigenvalueSumMatchesEntrywiseFiniteDifferences) {
  std::mt19937_64 rng(5);
  const RealMatrix a = testing_support::random_hermitian<double>(8, rng);
  RealVector w(8);
  for (Eigen::Index k = 0; k < 8; ++k) w(k) = 0.3 * static_cast<double>(k) - 1.0;
  auto loss = [&](const RealMatrix& m) { return w.dot(spectral::eigh(m).values); };
  const auto s = spectral::eigh(a);
  SpectrumAdjoint<double> adj;
  adj.eigenvalues = w;
  const RealMatrix a_bar = eigh_vjp(s, adj);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = i; j < 8; ++j) {
      RealMatrix e = RealMatrix::Zero(8, 8);
      e(i, j) = 1.0;
      e(j, i) = 1.0;
      const double fd = (loss(a + h * e) - loss(a - h * e)) / (2 * h);
      const double rev = frobenius_inner<double>(a_bar, e);
      EXPECT_NEAR(rev, fd, 1e-6 * std::max(1.0, std::abs(fd))) << i << "," << j;
    }
  }
}

TEST(EighVjp, EigenvectorEntryMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const ComplexMatrix a = testing_support::random_hermitian<cplx>(4, rng);
  auto loss = [](const ComplexMatrix& m) { return std::norm(spectral::eigh(m).vectors(0, 0)); };
  const auto s = spectral::eigh(a);
  SpectrumAdjoint<cplx> adj;
  adj.eigenvectors = ComplexMatrix::Zero(4, 4);
  adj.eigenvectors(0, 0) = 2.0 * s.vectors(0, 0);
  const ComplexMatrix a_bar = eigh_vjp(s, adj);
  const double h = 1e-6;
  for (int trial = 0; trial < 6; ++trial) {
    const ComplexMatrix t = testing_support::random_hermitian<cplx>(4, rng);
    const double fd = (loss(a + h * t) - loss(a - h * t)) / (2 * h);
    EXPECT_NEAR(frobenius_inner<cplx>(a_bar, t), fd, 1e-5 * std::max(std::abs(fd), 1e-3));
  }
}

TEST(EighVjp, AdjointIdentityReal) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const RealMatrix a = testing_support::random_hermitian<double>(10, rng);
    const RealMatrix t = testing_support::random_hermitian<double>(10, rng);
    const auto s = spectral::eigh(a);
    SpectrumAdjoint<double> adj;
    adj.eigenvalues = RealVector::Random(10);
    adj.eigenvectors = RealMatrix::Random(10, 10);
    const auto [dd, du] = spectrum_jvp(s, t);
    const double lhs = adj.eigenvalues.dot(dd) + frobenius_inner<double>(adj.eigenvectors, du);
    const double rhs = frobenius_inner<double>(eigh_vjp(s, adj), t);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
  }
}

TEST(EighVjp, AdjointIdentityComplexGaugeFixed) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexMatrix a = testing_support::random_hermitian<cplx>(10, rng);
    const ComplexMatrix t = testing_support::random_hermitian<cplx>(10, rng);
    const auto s = spectral::eigh(a);
    SpectrumAdjoint<cplx> adj;
    adj.eigenvalues = RealVector::Random(10);
    adj.eigenvectors = ComplexMatrix::Random(10, 10);
    const auto [dd, du] = spectrum_jvp(s, t);
    const double lhs = adj.eigenvalues.dot(dd) + frobenius_inner<cplx>(adj.eigenvectors, du);
    const ComplexMatrix a_bar = eigh_vjp(s, adj);
    const double rhs = frobenius_inner<cplx>(a_bar, t);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
    EXPECT_LT(hermiticity_deviation(a_bar), 1e-14);
  }
}

TEST(EighVjp, PartialCotangentsPadWithZeros) {
  std::mt19937_64 rng(2);
  const RealMatrix a = testing_support::random_hermitian<double>(6, rng);
  const auto s = spectral::eigh(a);
  SpectrumAdjoint<double> partial;
  partial.eigenvalues = RealVector::Ones(2);
  partial.eigenvectors = RealMatrix::Ones(6, 3);
  SpectrumAdjoint<double> full;
  full.eigenvalues = RealVector::Zero(6);
  full.eigenvalues.head(2).setOnes();
  full.eigenvectors = RealMatrix::Zero(6, 6);
  full.eigenvectors.leftCols(3).setOnes();
  EXPECT_LT((eigh_vjp(s, partial) - eigh_vjp(s, full)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EighVjp, DegenerateEigenvectorCotangentRaises) {
  const auto s = spectral::eigh(RealMatrix(RealMatrix::Identity(3, 3)));
  SpectrumAdjoint<double> values_only;
  values_only.eigenvalues = RealVector::Ones(3);
  EXPECT_NO_THROW(eigh_vjp(s, values_only));
  SpectrumAdjoint<double> vectors;
  vectors.eigenvectors = RealMatrix::Ones(3, 3);
  EXPECT_THROW(eigh_vjp(s, vectors), DegenerateSpectrumError);
}

TEST(FiniteDiff, Square) {
  ParamVector x;
  x.add("x", 3.0, Unit::dimensionless);
  FiniteDiffOptions o;
  o.steps = {1e-4};
  const auto g = finite_diff_grad([](const ParamVector& p) { return p.value(0) * p.value(0); }, x, o);
  EXPECT_NEAR(g["x"], 6.0, 1e-7);
}

TEST(FiniteDiff, ConstantIsExactlyZero) {
  ParamVector x;
  x.add("x", 3.0, Unit::GHz).add("y", -1e3, Unit::ns);
  const auto g = finite_diff_grad([](const ParamVector&) { return 4.25; }, x);
  EXPECT_EQ(g.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FiniteDiff, IllConditionedQuadratic) {
  ParamVector x;
  x.add("x", 1.0, Unit::dimensionless).add("y", 0.0, Unit::dimensionless);
  const auto g = finite_diff_grad(
      [](const ParamVector& p) { return optimize::demo_objective(p.value(0), p.value(1)); }, x);
  EXPECT_NEAR(g["x"], 202.0, 1e-5);
  EXPECT_NEAR(g["y"], -198.0, 1e-5);
}

TEST(FiniteDiff, NonFiniteValueRaises) {
  ParamVector x;
  x.add("x", 0.0, Unit::dimensionless);
  EXPECT_THROW(finite_diff_grad([](const ParamVector& p) { return p.value(0) > 0 ? NAN : 0.0; }, x),
               EvaluationError);
}

TEST(FiniteDiff, ThreadCountDoesNotChangeResult) {
  ParamVector x;
  for (int i = 0; i < 7; ++i) x.add("p" + std::to_string(i), 0.1 * i, Unit::dimensionless);
  auto f = [](const ParamVector& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::sin(p.value(i) * static_cast<double>(i + 1));
    return s;
  };
  FiniteDiffOptions serial;
  FiniteDiffOptions parallel;
  parallel.threads = 4;
  const auto a = finite_diff_grad(f, x, serial);
  const auto b = finite_diff_grad(f, x, parallel);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(a.values(i), b.values(i));
}

TEST(CheckGradient, PassesForCorrectAndFailsForScaled) {
  ParamVector x;
  x.add("x", 1.7, Unit::dimensionless);
  auto f = [](const ParamVector& p) { return p.value(0) * p.value(0); };
  auto good = [](const ParamVector& p) {
    auto g = Gradient::zeros(p);
    g.values(0) = 2.0 * p.value(0);
    return g;
  };
  auto bad = [&](const ParamVector& p) {
    auto g = good(p);
    g.values *= 2.0;
    return g;
  };
  const auto ok = check_gradient(f, good, x, 1e-6, 0.0);
  EXPECT_TRUE(ok.all_pass);
  EXPECT_LT(ok.max_rel_error, 1e-6);
  const auto wrong = check_gradient(f, bad, x, 1e-6, 0.0);
  EXPECT_FALSE(wrong.all_pass);
  EXPECT_FALSE(wrong.components[0].pass);
}

TEST(CheckGradient, AbsoluteFloorCoversVanishingComponents) {
  Gradient rev;
  rev.names = {"a"};
  rev.values = RealVector::Constant(1, 1e-10);
  Gradient fd = rev;
  fd.values(0) = -1e-10;
  EXPECT_FALSE(compare_gradients(rev, fd, 1e-4, 0.0).all_pass);
  EXPECT_TRUE(compare_gradients(rev, fd, 1e-4, 1e-8).all_pass);
}
