#include <gtest/gtest.h>

#include <chrono>

#include "qmetric/convex_engine.hpp"
#include "support/fixtures.hpp"

using namespace qmetric;
using namespace qmetric::testing;

namespace {

BallSpec two_point_ball(std::optional<DensityState> slice = std::nullopt, double radius = 1.0) {
  return BallSpec{two_point_algebra(), two_point_lipnorm(), radius, std::move(slice)};
}

HermitianMatrix two_point_c() { return HermitianMatrix::diagonal({1.0, -1.0}); }

BallSpec random_ball(std::uint64_t seed, bool sliced) {
  std::optional<DensityState> slice;
  if (sliced) slice = random_state(seed + 7, 2);
  return BallSpec{AlgebraSpec::full(2), random_dirac(seed, 2), 1.0, slice};
}

HermitianMatrix traceless(const HermitianMatrix& a) {
  return HermitianMatrix(a.matrix() - a.matrix().trace().real() / a.dim() * identity_matrix(a.dim()));
}

}  // namespace

TEST(MaxLinear, ZeroObjective) {
  const auto r = max_linear_over_ball(HermitianMatrix::zero(2), two_point_ball(), SolverConfig{});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(operator_norm(r.argmax), 0.0);
}

TEST(MaxLinear, TwoPointMk) {
  const auto r = max_linear_over_ball(two_point_c(), two_point_ball(), SolverConfig{});
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_GE(r.certificate, r.value);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(eval_lipnorm(two_point_lipnorm(), r.argmax), 1.0 + 1e-9);
}

TEST(MaxLinear, RadiusHomogeneity) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const HermitianMatrix c = traceless(random_hermitian(90 + s, 2));
    BallSpec b = random_ball(s, false);
    const double v1 = max_linear_over_ball(c, b, SolverConfig{}).value;
    b.radius = 2.0;
    const double v2 = max_linear_over_ball(c, b, SolverConfig{}).value;
    EXPECT_NEAR(v2, 2.0 * v1, 4e-6 * v2);
  }
}

TEST(MaxLinear, UnboundedOnTrace) {
  try {
    max_linear_over_ball(HermitianMatrix::identity(2), two_point_ball(), SolverConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnboundedProblem);
  }
}

TEST(MaxLinear, UnboundedForNonLipNorm) {
  const BallSpec b{AlgebraSpec::full(3), LipNormSpec::dirac(random_hermitian(3, 3).matrix()), 1.0, std::nullopt};
  EXPECT_THROW(max_linear_over_ball(traceless(random_hermitian(4, 3)), b, SolverConfig{}), Error);
}

TEST(MaxLinear, DualitySandwichAndSymmetry) {
  for (int n : {2, 3}) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const BallSpec b{AlgebraSpec::full(n), random_dirac(200 + s, n), 1.0, std::nullopt};
      const HermitianMatrix c = traceless(random_hermitian(300 + s, n));
      const auto r = max_linear_over_ball(c, b, SolverConfig{});
      const auto rn = max_linear_over_ball(-c, b, SolverConfig{});
      EXPECT_TRUE(r.converged);
      EXPECT_LE(r.value, r.certificate);
      EXPECT_LE(r.certificate - r.value, 1e-6 * std::max(1.0, r.value));
      EXPECT_NEAR(r.value, rn.value, 2e-6 * std::max(1.0, r.value));
      EXPECT_LE(eval_lipnorm(b.lipnorm, r.argmax), 1.0 + 1e-9);
      EXPECT_NEAR((c.matrix() * r.argmax.matrix()).trace().real(), r.value, 1e-9);
    }
  }
}

TEST(MaxLinear, SlicedArgmaxLiesInSlice) {
  const BallSpec b = random_ball(5, true);
  const auto r = max_linear_over_ball(random_hermitian(6, 2), b, SolverConfig{});
  EXPECT_NEAR(state_eval(*b.slice, r.argmax), 0.0, 1e-12);
}

TEST(MinDistance, InsideBall) {
  const HermitianMatrix a = HermitianMatrix::diagonal({0.2, -0.1});
  const auto r = min_distance_to_ball(a, two_point_ball(), SolverConfig{});
  EXPECT_EQ(r.dist, 0.0);
  EXPECT_EQ((r.projection.matrix() - a.matrix()).norm(), 0.0);
}

TEST(MinDistance, TwoPointSlicedMatchesOracle) {
  const BallSpec b = two_point_ball(DensityState::basis_state(2, 0));
  const HermitianMatrix a = HermitianMatrix::diagonal({2.0, 0.0});
  const auto r = min_distance_to_ball(a, b, SolverConfig{});
  const auto o = brute_force_oracle(OracleProblem::MinDistance, b, OraclePayload{{}, a, std::nullopt}, 201);
  // The slice is {diag(0, y) : |y| <= 1}; the nearest point is 0 at distance 2.
  EXPECT_NEAR(r.dist, 2.0, 1e-6);
  EXPECT_NEAR(r.dist, o.value, o.error_bound + 1e-9);
}

TEST(MinDistance, CentralShiftInvariance) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const BallSpec b = random_ball(400 + s, false);
    const HermitianMatrix a = random_hermitian(500 + s, 2, 3.0);
    const double d1 = min_distance_to_ball(a, b, SolverConfig{}).dist;
    const double d2 = min_distance_to_ball(a + 2.7 * HermitianMatrix::identity(2), b, SolverConfig{}).dist;
    EXPECT_NEAR(d1, d2, 3e-6 * std::max(1.0, d1));
  }
}

TEST(MinDistance, LowerBoundAndFeasibility) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const BallSpec b = random_ball(600 + s, true);
    const HermitianMatrix a = random_hermitian(700 + s, 2, 3.0);
    const auto r = min_distance_to_ball(a, b, SolverConfig{});
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.lower_bound, r.dist + 1e-12);
    EXPECT_NEAR(operator_norm(a.matrix() - r.projection.matrix()), r.dist, 1e-9);
    EXPECT_TRUE(LipBall(b).contains(r.projection, 1e-9));
  }
}

TEST(MinDistance, RadiusMonotone) {
  const BallSpec b = random_ball(800, true);
  BallSpec big = b;
  big.radius = 1.5;
  const HermitianMatrix a = random_hermitian(801, 2, 3.0);
  EXPECT_LE(min_distance_to_ball(a, big, SolverConfig{}).dist, min_distance_to_ball(a, b, SolverConfig{}).dist + 1e-6);
}

TEST(MaxConvex, TwoPointOperatorNorm) {
  const auto r = max_convex_over_ball(ConvexFunctional::operator_norm(), two_point_ball(DensityState::basis_state(2, 0)), SolverConfig{});
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_NEAR(eval_lipnorm(two_point_lipnorm(), r.argmax), 1.0, 1e-6);
}

TEST(MaxConvex, ZeroFunctional) {
  const auto r = max_convex_over_ball(ConvexFunctional::custom([](const HermitianMatrix&) { return 0.0; }), random_ball(1, true), SolverConfig{});
  EXPECT_EQ(r.value, 0.0);
}

TEST(MaxConvex, LinearMatchesMaxLinear) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const BallSpec b = random_ball(900 + s, true);
    const HermitianMatrix c = random_hermitian(950 + s, 2);
    const double lin = max_linear_over_ball(c, b, SolverConfig{}).value;
    const double cvx = max_convex_over_ball(ConvexFunctional::linear(c), b, SolverConfig{}).value;
    EXPECT_NEAR(cvx, lin, 2e-6 * std::max(1.0, lin));
  }
}

TEST(MaxConvex, BoundaryAndDeterminism) {
  const BallSpec b{AlgebraSpec::full(3), random_dirac(77, 3), 1.0, DensityState::maximally_mixed(3)};
  SolverConfig cfg;
  cfg.restarts = 4;
  const auto r1 = max_convex_over_ball(ConvexFunctional::spread(), b, cfg);
  const auto r2 = max_convex_over_ball(ConvexFunctional::spread(), b, cfg);
  EXPECT_EQ(r1.value, r2.value);
  EXPECT_EQ(r1.coords, r2.coords);
  const double l = eval_lipnorm(b.lipnorm, r1.argmax);
  EXPECT_GE(l, 1.0 - 1e-6);
  EXPECT_LE(l, 1.0 + 1e-6);
}

TEST(Oracle, TwoPointMkErrorBound) {
  for (int res : {51, 101, 201}) {
    const auto o = brute_force_oracle(OracleProblem::MaxLinear, two_point_ball(), OraclePayload{two_point_c(), {}, std::nullopt}, res);
    EXPECT_NEAR(o.error_bound, 2.0 / (res - 1), 1e-12);
    EXPECT_NEAR(o.value, 1.0, o.error_bound);
  }
}

TEST(Oracle, ZeroObjective) {
  const auto o = brute_force_oracle(OracleProblem::MaxLinear, random_ball(3, false), OraclePayload{HermitianMatrix::zero(2), {}, std::nullopt}, 51);
  EXPECT_EQ(o.value, 0.0);
}

TEST(Oracle, ScaledBall) {
  const BallSpec b = random_ball(10, true);
  BallSpec scaled = b;
  scaled.lipnorm = LipNormSpec::scaled(2.0, b.lipnorm);
  const OraclePayload p{random_hermitian(11, 2), {}, std::nullopt};
  const auto o1 = brute_force_oracle(OracleProblem::MaxLinear, b, p, 61);
  const auto o2 = brute_force_oracle(OracleProblem::MaxLinear, scaled, p, 61);
  EXPECT_NEAR(o2.value, 0.5 * o1.value, o1.error_bound + o2.error_bound);
}

TEST(Oracle, RejectsLargeDimension) {
  const BallSpec b{AlgebraSpec::full(3), random_dirac(1, 3), 1.0, std::nullopt};
  try {
    brute_force_oracle(OracleProblem::MaxLinear, b, OraclePayload{HermitianMatrix::zero(3), {}, std::nullopt}, 51);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedDimension);
  }
  EXPECT_THROW(brute_force_oracle(OracleProblem::MaxLinear, two_point_ball(), OraclePayload{two_point_c(), {}, std::nullopt}, 50), Error);
}

TEST(SolverVsOracle, RandomTwoByTwo) {
  SolverConfig cfg;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const BallSpec b = random_ball(1000 + s, true);
    const HermitianMatrix c = random_hermitian(1100 + s, 2);
    const auto lin = max_linear_over_ball(c, b, cfg);
    const auto olin = brute_force_oracle(OracleProblem::MaxLinear, b, OraclePayload{c, {}, std::nullopt}, 101);
    EXPECT_LE(std::abs(lin.value - olin.value), std::max(0.02 * std::abs(olin.value), olin.error_bound)) << s;
    EXPECT_GE(lin.certificate, olin.value - 1e-9);

    const HermitianMatrix a = random_hermitian(1200 + s, 2, 2.0);
    const auto dist = min_distance_to_ball(a, b, cfg);
    const auto odist = brute_force_oracle(OracleProblem::MinDistance, b, OraclePayload{{}, a, std::nullopt}, 101);
    EXPECT_LE(std::abs(dist.dist - odist.value), std::max(0.02 * odist.value, odist.error_bound)) << s;

    const auto g = ConvexFunctional::operator_norm();
    const auto cvx = max_convex_over_ball(g, b, cfg);
    const auto ocvx = brute_force_oracle(OracleProblem::MaxConvex, b, OraclePayload{{}, {}, g}, 101);
    EXPECT_LE(std::abs(cvx.value - ocvx.value), std::max(0.02 * ocvx.value, ocvx.error_bound)) << s;
  }
}

TEST(CuttingPlane, LpSolvesBoxedProblem) {
  // max x + y s.t. ||diag(x, y)|| <= 1 gives 2 at (1, 1).
  CuttingPlaneProblem p;
  p.objective = RVector::Ones(2);
  p.lower = RVector::Constant(2, -5.0);
  p.upper = RVector::Constant(2, 5.0);
  NormConstraint c;
  c.offset = CMatrix::Zero(2, 2);
  CMatrix e0 = CMatrix::Zero(2, 2), e1 = CMatrix::Zero(2, 2);
  e0(0, 0) = 1.0;
  e1(1, 1) = 1.0;
  c.terms = {{0, e0}, {1, e1}};
  c.rhs_const = 1.0;
  p.constraints.push_back(c);
  auto repair = [&](const RVector& z) -> std::optional<RVector> {
    const double v = z.cwiseAbs().maxCoeff();
    return v <= 1.0 ? z : RVector(z / v);
  };
  const auto r = solve_cutting_plane(p, repair, RVector::Zero(2), 1e-9, 100);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 2.0, 1e-9);
}
