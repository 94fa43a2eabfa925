#include <gtest/gtest.h>

#include "qmetric/matrix_core.hpp"

using namespace qmetric;

TEST(MatrixCore, OperatorNormMatchesSvd) {
  for (int n : {1, 2, 3, 5, 8}) {
    Rng rng(100 + n);
    const CMatrix a = gaussian_matrix(rng, n, n);
    Eigen::JacobiSVD<CMatrix> svd(a);
    EXPECT_NEAR(operator_norm(a), svd.singularValues()(0), 1e-12 * svd.singularValues()(0)) << n;
  }
}

TEST(MatrixCore, OperatorNormRectangularAndVector) {
  Rng rng(7);
  const CMatrix a = gaussian_matrix(rng, 3, 6);
  Eigen::JacobiSVD<CMatrix> svd(a);
  EXPECT_NEAR(operator_norm(a), svd.singularValues()(0), 1e-12);
  const CMatrix v = gaussian_matrix(rng, 5, 1);
  EXPECT_NEAR(operator_norm(v), v.norm(), 1e-12);
}

TEST(MatrixCore, OperatorNormRejectsNonFinite) {
  CMatrix a = CMatrix::Identity(2, 2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    operator_norm(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(MatrixCore, OperatorNormProperties) {
  for (int s = 0; s < 20; ++s) {
    Rng rng(1000 + s);
    const CMatrix a = gaussian_matrix(rng, 4, 4), b = gaussian_matrix(rng, 4, 4);
    EXPECT_LE(operator_norm(a + b), operator_norm(a) + operator_norm(b) + 1e-12);
    EXPECT_NEAR(operator_norm(a.adjoint()), operator_norm(a), 1e-12);
    EXPECT_NEAR(operator_norm(a * 2.5), 2.5 * operator_norm(a), 1e-11);
  }
}

TEST(MatrixCore, TopSingularTriples) {
  Rng rng(3);
  const CMatrix a = gaussian_matrix(rng, 4, 3);
  const auto t = top_singular_triples(a, 2);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_GE(t[0].sigma, t[1].sigma);
  EXPECT_NEAR((a * t[0].v - t[0].sigma * t[0].u).norm(), 0.0, 1e-10);
}

TEST(MatrixCore, HermitianConstructionAndProducts) {
  CMatrix m(2, 2);
  m << 1, cplx(0, 1), cplx(0, -1), 2;
  const HermitianMatrix a(m);
  const HermitianMatrix b = HermitianMatrix::diagonal({1.0, -1.0});
  EXPECT_NEAR((a.jordan(b).matrix() - 0.5 * (m * b.matrix() + b.matrix() * m)).norm(), 0.0, 1e-14);
  const CMatrix lie = (m * b.matrix() - b.matrix() * m) / (2.0 * kI);
  EXPECT_NEAR((a.lie(b).matrix() - lie).norm(), 0.0, 1e-14);
  EXPECT_THROW(HermitianMatrix(CMatrix::Zero(2, 3)), Error);
}

TEST(MatrixCore, SpreadAndCentralNormalize) {
  const HermitianMatrix a = HermitianMatrix::diagonal({3.0, -1.0, 0.5});
  EXPECT_DOUBLE_EQ(spectral_spread(a), 4.0);
  const HermitianMatrix c = central_normalize(a);
  const RVector ev = eigenvalues(c);
  EXPECT_NEAR(ev(0) + ev(ev.size() - 1), 0.0, 1e-14);
  EXPECT_NEAR(operator_norm(c), 2.0, 1e-14);
}

TEST(MatrixCore, DensityStateValidation) {
  EXPECT_NO_THROW(DensityState::maximally_mixed(3));
  EXPECT_THROW(DensityState(HermitianMatrix::diagonal({0.7, 0.7}).matrix()), Error);
  EXPECT_THROW(DensityState(HermitianMatrix::diagonal({1.5, -0.5}).matrix()), Error);
  const DensityState rho = random_state(11, 4);
  EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-12);
  EXPECT_GE(eigenvalues(rho.rho())(0), -1e-12);
}

TEST(MatrixCore, StateEvaluation) {
  const DensityState rho = DensityState::basis_state(3, 1);
  EXPECT_NEAR(state_eval(rho, HermitianMatrix::diagonal({1.0, 5.0, 2.0})), 5.0, 1e-15);
  const DensityState mixed = DensityState::maximally_mixed(2);
  EXPECT_NEAR(state_eval(mixed, HermitianMatrix::diagonal({1.0, 3.0})), 2.0, 1e-15);
}

TEST(MatrixCore, UnitaryMapValidationAndAction) {
  EXPECT_THROW(UnitaryMap(CMatrix::Identity(2, 2) * 1.1), Error);
  const UnitaryMap u = random_unitary(5, 4);
  EXPECT_NEAR((u.matrix().adjoint() * u.matrix() - CMatrix::Identity(4, 4)).norm(), 0.0, 1e-12);
  const HermitianMatrix a = random_hermitian(6, 4);
  EXPECT_NEAR((u.inverse().apply(u.apply(a)).matrix() - a.matrix()).norm(), 0.0, 1e-12);
  EXPECT_NEAR(operator_norm(u.apply(a)), operator_norm(a), 1e-12);
}

TEST(MatrixCore, UnitaryExp) {
  const HermitianMatrix k = random_hermitian(9, 3);
  const CMatrix u = unitary_exp(k);
  EXPECT_NEAR((u.adjoint() * u - CMatrix::Identity(3, 3)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((unitary_exp(HermitianMatrix::zero(3)) - CMatrix::Identity(3, 3)).norm(), 0.0, 1e-15);
}

TEST(MatrixCore, HermitianBasisIsOrthonormal) {
  for (const AlgebraSpec& alg : {AlgebraSpec::full(3), AlgebraSpec::diagonal(3), AlgebraSpec{{2, 1}}, AlgebraSpec{{1, 2, 2}}}) {
    const HermitianBasis basis(alg);
    EXPECT_EQ(basis.size(), alg.real_dimension());
    for (int i = 0; i < basis.size(); ++i) {
      EXPECT_TRUE(alg.contains(basis.element(i)));
      for (int j = 0; j < basis.size(); ++j) {
        const double ip = (basis.element(i) * basis.element(j)).trace().real();
        EXPECT_NEAR(ip, i == j ? 1.0 : 0.0, 1e-13);
      }
    }
    const HermitianMatrix a = random_hermitian(21, alg);
    EXPECT_NEAR((basis.reconstruct(basis.coordinates(a)).matrix() - a.matrix()).norm(), 0.0, 1e-12);
  }
}

TEST(MatrixCore, AlgebraSpecValidation) {
  EXPECT_THROW((AlgebraSpec{{}}.validate()), Error);
  EXPECT_THROW((AlgebraSpec{{2, 0}}.validate()), Error);
  EXPECT_EQ((AlgebraSpec{{2, 1}}.real_dimension()), 5);
  EXPECT_EQ(AlgebraSpec::full(3).real_dimension(), 9);
}

TEST(MatrixCore, Kron) {
  CMatrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 0, 1, 1, 0;
  const CMatrix k = kron(a, b);
  EXPECT_EQ(k(0, 1), cplx(1.0));
  EXPECT_EQ(k(3, 2), cplx(4.0));
  EXPECT_EQ(k(2, 1), cplx(3.0));
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
  EXPECT_NE(sub_seed(1, 0), sub_seed(1, 1));
  Rng c(7);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = c.normal();
    mean += x;
    var += x * x;
  }
  EXPECT_NEAR(mean / n, 0.0, 0.03);
  EXPECT_NEAR(var / n, 1.0, 0.05);
}
