#include <gtest/gtest.h>

#include "qmetric/lipnorms.hpp"
#include "support/fixtures.hpp"

using namespace qmetric;
using namespace qmetric::testing;

namespace {

std::vector<LipNormSpec> sample_specs(int n) {
  std::vector<LipNormSpec> out;
  out.push_back(random_dirac(11, n));
  out.push_back(LipNormSpec::perturbed(random_hermitian(12, 2 * n).matrix(), random_hermitian(13, 2 * n, 0.3).matrix(), 2));
  CMatrix h = random_hermitian(14, n, 0.2).matrix() + 2.0 * identity_matrix(n);
  out.push_back(LipNormSpec::conformal(random_hermitian(15, 2 * n).matrix(), h, 2));
  RMatrix hc(2, 2);
  hc << 1.0, 0.3, -0.2, 0.8;
  out.push_back(LipNormSpec::curved(clock_shift_generators(n), hc));
  out.push_back(LipNormSpec::scaled(1.7, random_dirac(16, n)));
  return out;
}

}  // namespace

TEST(LipNorms, UnitHasZeroSeminorm) {
  for (const auto& spec : sample_specs(3)) EXPECT_EQ(eval_lipnorm(spec, HermitianMatrix::identity(3)), 0.0) << spec.variant_name();
}

TEST(LipNorms, TwoPointCommutator) {
  const LipNormSpec l = two_point_lipnorm();
  for (auto [x, y] : {std::pair{1.0, 0.0}, {0.3, -2.0}, {5.0, 5.0}})
    EXPECT_NEAR(eval_lipnorm(l, HermitianMatrix::diagonal({x, y})), std::abs(x - y), 1e-14);
}

TEST(LipNorms, ScaledAndPerturbedZero) {
  const LipNormSpec base = random_dirac(3, 3);
  const LipNormSpec scaled = LipNormSpec::scaled(2.0, base);
  const auto& d = std::get<DiracCommutator>(base.variant()).dirac;
  const LipNormSpec pert = LipNormSpec::perturbed(d, CMatrix::Zero(6, 6), 2);
  for (int s = 0; s < 10; ++s) {
    const HermitianMatrix a = random_hermitian(100 + s, 3);
    EXPECT_NEAR(eval_lipnorm(scaled, a), 2.0 * eval_lipnorm(base, a), 1e-12);
    EXPECT_EQ(eval_lipnorm(pert, a), eval_lipnorm(base, a));
  }
}

TEST(LipNorms, ConformalWithUnitFactorIsBase) {
  const LipNormSpec base = random_dirac(4, 3);
  const auto& d = std::get<DiracCommutator>(base.variant()).dirac;
  const LipNormSpec conf = LipNormSpec::conformal(d, identity_matrix(3), 2);
  for (int s = 0; s < 10; ++s) {
    const HermitianMatrix a = random_hermitian(200 + s, 3);
    EXPECT_EQ(eval_lipnorm(conf, a), eval_lipnorm(base, a));
  }
}

TEST(LipNorms, ConformalScalarFactor) {
  // h = c1 gives D_h = c^2 D and a twist that fixes a.
  const LipNormSpec base = two_point_lipnorm();
  const LipNormSpec conf = LipNormSpec::conformal(pauli_x(), 1.5 * identity_matrix(2));
  const HermitianMatrix a = HermitianMatrix::diagonal({0.4, -1.1});
  EXPECT_NEAR(eval_lipnorm(conf, a), 2.25 * eval_lipnorm(base, a), 1e-13);
}

TEST(LipNorms, ConformalRejectsSingularFactor) {
  try {
    validate_lipnorm(LipNormSpec::conformal(pauli_x(), HermitianMatrix::diagonal({1.0, 0.0}).matrix()), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularInput);
  }
}

TEST(LipNorms, ShapeMismatch) {
  try {
    eval_lipnorm(two_point_lipnorm(), HermitianMatrix::identity(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(LipNorms, CurvedSingleGenerator) {
  // m = 1, H = 1: the gamma matrix is a unitary factor, so L(a) = ||[iX, a]||.
  const auto gens = clock_shift_generators(3);
  const LipNormSpec l = LipNormSpec::curved({gens[0]}, RMatrix::Identity(1, 1));
  for (int s = 0; s < 5; ++s) {
    const HermitianMatrix a = random_hermitian(300 + s, 3);
    const CMatrix comm = kI * (gens[0] * a.matrix() - a.matrix() * gens[0]);
    EXPECT_NEAR(eval_lipnorm(l, a), operator_norm(comm), 1e-12);
  }
}

TEST(LipNorms, GammaMatricesAnticommute) {
  for (int m = 1; m <= 5; ++m) {
    const auto g = gamma_matrices(m);
    ASSERT_EQ(static_cast<int>(g.size()), m);
    const int size = 1 << ((m + 1) / 2);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        EXPECT_EQ(g[i].rows(), size);
        const CMatrix ac = g[i] * g[j] + g[j] * g[i];
        const CMatrix expect = (i == j ? 2.0 : 0.0) * identity_matrix(size);
        EXPECT_NEAR((ac - expect).norm(), 0.0, 1e-14);
      }
  }
}

TEST(LipNorms, SeminormAxioms) {
  for (const auto& spec : sample_specs(3)) {
    for (int s = 0; s < 200; ++s) {
      const HermitianMatrix a = random_hermitian(1000 + s, 3), b = random_hermitian(5000 + s, 3);
      const double la = eval_lipnorm(spec, a), lb = eval_lipnorm(spec, b);
      EXPECT_LE(eval_lipnorm(spec, a + b), la + lb + 1e-9) << spec.variant_name();
      EXPECT_NEAR(eval_lipnorm(spec, -2.5 * a), 2.5 * la, 1e-9 * std::max(1.0, la)) << spec.variant_name();
    }
  }
}

TEST(LipNorms, UnitaryCovariance) {
  const int n = 3, m = 2;
  const CMatrix d = random_hermitian(21, n * m).matrix();
  const UnitaryMap u = random_unitary(22, n);
  const CMatrix uu = kron(u.matrix(), identity_matrix(m));
  const LipNormSpec l = LipNormSpec::dirac(d, m);
  const LipNormSpec lu = LipNormSpec::dirac(uu * d * uu.adjoint(), m);
  for (int s = 0; s < 20; ++s) {
    const HermitianMatrix a = random_hermitian(400 + s, n);
    EXPECT_NEAR(eval_lipnorm(lu, u.apply(a)), eval_lipnorm(l, a), 1e-9);
  }
}

TEST(LipNorms, PerturbationLipschitzBound) {
  const CMatrix d = random_hermitian(31, 6).matrix();
  for (int s = 0; s < 50; ++s) {
    const CMatrix w1 = random_hermitian(600 + s, 6, 0.5).matrix(), w2 = random_hermitian(700 + s, 6, 0.5).matrix();
    const HermitianMatrix a = random_hermitian(800 + s, 3);
    const double diff = std::abs(eval_lipnorm(LipNormSpec::perturbed(d, w1, 2), a) - eval_lipnorm(LipNormSpec::perturbed(d, w2, 2), a));
    EXPECT_LE(diff, 2.0 * operator_norm(w1 - w2) * operator_norm(a) + 1e-9);
  }
}

TEST(LipNorms, DomainNorm) {
  const LipNormSpec l = two_point_lipnorm();
  EXPECT_DOUBLE_EQ(domain_norm(l, HermitianMatrix::identity(2)), 1.0);
  EXPECT_DOUBLE_EQ(domain_norm(l, HermitianMatrix::zero(2)), 0.0);
  EXPECT_NEAR(domain_norm(l, HermitianMatrix::diagonal({1.0, -1.0})), 3.0, 1e-14);
}

TEST(KernelCheck, TwoPointIsLipNorm) {
  const auto r = kernel_check(two_point_lipnorm(), HermitianBasis(two_point_algebra()));
  EXPECT_TRUE(r.is_lipnorm);
  // Oracle: the only traceless unit direction is diag(1,-1)/sqrt2 with L = sqrt2.
  EXPECT_NEAR(r.min_value, std::sqrt(2.0), 1e-12);
}

TEST(KernelCheck, GenericDiracOnDiagonalAlgebra) {
  for (int n : {2, 3, 4}) {
    const auto r = kernel_check(LipNormSpec::dirac(random_hermitian(40 + n, n).matrix()), HermitianBasis(AlgebraSpec::diagonal(n)));
    EXPECT_TRUE(r.is_lipnorm) << n;
  }
}

TEST(KernelCheck, DiagonalDiracFailsOnDiagonalAlgebra) {
  // Nondegenerate but diagonal D commutes with every diagonal a.
  const auto r = kernel_check(LipNormSpec::dirac(HermitianMatrix::diagonal({1.0, 2.0, 4.0}).matrix()),
                              HermitianBasis(AlgebraSpec::diagonal(3)));
  EXPECT_FALSE(r.is_lipnorm);
}

TEST(KernelCheck, ZeroDiracFails) {
  const auto r = kernel_check(LipNormSpec::dirac(CMatrix::Zero(2, 2)), HermitianBasis(two_point_algebra()));
  EXPECT_FALSE(r.is_lipnorm);
  EXPECT_EQ(r.min_value, 0.0);
  EXPECT_NEAR(r.witness.matrix().trace().real(), 0.0, 1e-14);
  EXPECT_NEAR(r.witness.matrix().norm(), 1.0, 1e-12);
}

TEST(KernelCheck, SingleDiracOnFullAlgebraFails) {
  // Polynomials in D commute with D.
  const auto r = kernel_check(LipNormSpec::dirac(random_hermitian(5, 3).matrix()), HermitianBasis::full(3));
  EXPECT_FALSE(r.is_lipnorm);
  EXPECT_LT(eval_lipnorm(LipNormSpec::dirac(random_hermitian(5, 3).matrix()), r.witness), 1e-8);
}

TEST(KernelCheck, AmplifiedDiracOnFullAlgebra) {
  for (int n : {2, 3, 4}) EXPECT_TRUE(kernel_check(random_dirac(50 + n, n), HermitianBasis::full(n)).is_lipnorm) << n;
}

TEST(KernelCheck, CurvedGenerators) {
  RMatrix h(2, 2);
  h << 1.0, 0.2, 0.0, 1.5;
  EXPECT_TRUE(kernel_check(LipNormSpec::curved(clock_shift_generators(3), h), HermitianBasis::full(3)).is_lipnorm);
  // A maximal torus of diagonal generators commutes with the diagonal subalgebra.
  std::vector<CMatrix> torus = {HermitianMatrix::diagonal({1.0, -1.0, 0.0}).matrix(),
                                HermitianMatrix::diagonal({1.0, 1.0, -2.0}).matrix()};
  EXPECT_FALSE(kernel_check(LipNormSpec::curved(torus, h), HermitianBasis::full(3)).is_lipnorm);
}

TEST(QuasiLeibniz, CommutatorIsLeibniz) {
  for (int n : {2, 3, 4}) {
    const LipNormSpec l = random_dirac(60 + n, n);
    double worst = -1e300;
    for (int s = 0; s < 300; ++s)
      worst = std::max(worst, quasi_leibniz_defect(l, AdmissibleF::leibniz(), random_hermitian(2000 + s, n), random_hermitian(3000 + s, n)));
    EXPECT_LE(worst, 1e-9) << n;
  }
}

TEST(QuasiLeibniz, UnitPair) {
  const auto one = HermitianMatrix::identity(2);
  EXPECT_EQ(quasi_leibniz_defect(two_point_lipnorm(), AdmissibleF::leibniz(), one, one), 0.0);
}

TEST(QuasiLeibniz, ConformalScaledLeibniz) {
  const int n = 3;
  const CMatrix h = random_hermitian(70, n, 0.3).matrix() + 1.5 * identity_matrix(n);
  const CMatrix h2 = h * h;
  const double m = operator_norm(h2) * operator_norm(CMatrix(h2.inverse()));
  const LipNormSpec l = LipNormSpec::conformal(random_hermitian(71, 2 * n).matrix(), h, 2);
  double worst = -1e300;
  for (int s = 0; s < 300; ++s)
    worst = std::max(worst, quasi_leibniz_defect(l, AdmissibleF::scaled_leibniz(m), random_hermitian(4000 + s, n), random_hermitian(4500 + s, n)));
  EXPECT_LE(worst, 1e-9);
}

TEST(AdmissibleF, Checks) {
  EXPECT_TRUE(AdmissibleF::leibniz().check_admissible(1));
  EXPECT_TRUE(AdmissibleF::scaled_leibniz(3.0).check_admissible(2));
  EXPECT_FALSE(AdmissibleF::custom([](double x, double y, double lx, double ly) { return 0.5 * (x * ly + y * lx); }).check_admissible(3));
  EXPECT_FALSE(AdmissibleF::custom([](double x, double y, double lx, double ly) { return x * ly + y * lx + 100.0 - x; }).check_admissible(4));
  EXPECT_THROW(AdmissibleF::scaled_leibniz(0.5), Error);
}
