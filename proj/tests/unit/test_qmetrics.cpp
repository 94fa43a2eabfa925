#include <gtest/gtest.h>

#include "qmetric/qmetrics.hpp"
#include "support/fixtures.hpp"

using namespace qmetric;
using namespace qmetric::testing;

namespace {

const AlgebraSpec kTwo = two_point_algebra();
const DensityState kFirst = DensityState::basis_state(2, 0);
const DensityState kSecond = DensityState::basis_state(2, 1);

SolverConfig fast_cfg() {
  SolverConfig cfg;
  cfg.restarts = 8;
  cfg.hausdorff_directions = 32;
  cfg.height_samples = 32;
  return cfg;
}

CMatrix swap_matrix() { return pauli_x(); }

}  // namespace

TEST(MkDistance, TwoPoint) {
  const auto r = mk_distance(kTwo, two_point_lipnorm(), kFirst, kSecond, SolverConfig{});
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_EQ(r.kind, ReportKind::ExactWithinTol);
  EXPECT_FALSE(r.tainted());
  EXPECT_LE(*r.lo, r.value);
  EXPECT_GE(*r.hi, r.value);
}

TEST(MkDistance, SameStateIsZero) {
  const DensityState rho = random_state(3, 3);
  EXPECT_EQ(mk_distance(AlgebraSpec::full(3), random_dirac(1, 3), rho, rho, SolverConfig{}).value, 0.0);
}

TEST(MkDistance, ScaledDividesByLambda) {
  const LipNormSpec l = random_dirac(2, 3);
  const DensityState r1 = random_state(4, 3), r2 = random_state(5, 3);
  SolverConfig cfg;
  cfg.tol = 1e-9;
  const double base = mk_distance(AlgebraSpec::full(3), l, r1, r2, cfg).value;
  for (double lambda : {0.5, 2.0, 5.0}) {
    const double v = mk_distance(AlgebraSpec::full(3), LipNormSpec::scaled(lambda, l), r1, r2, cfg).value;
    EXPECT_NEAR(v, base / lambda, 1e-6 * base / lambda);
  }
}

TEST(MkDistance, ExactSymmetry) {
  const LipNormSpec l = random_dirac(6, 2);
  for (int s = 0; s < 10; ++s) {
    const DensityState a = random_state(100 + s, 2), b = random_state(200 + s, 2);
    EXPECT_EQ(mk_distance(AlgebraSpec::full(2), l, a, b, SolverConfig{}).value,
              mk_distance(AlgebraSpec::full(2), l, b, a, SolverConfig{}).value);
  }
}

TEST(MkDistance, RejectsNonLipNorm) {
  try {
    mk_distance(kTwo, LipNormSpec::dirac(CMatrix::Zero(2, 2)), kFirst, kSecond, SolverConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotALipNorm);
  }
}

TEST(MkDiameter, TwoPointAndScaling) {
  const auto d = mk_diameter(kTwo, two_point_lipnorm(), SolverConfig{});
  EXPECT_NEAR(d.value, 1.0, 1e-9);
  EXPECT_GE(*d.hi, d.value);
  const auto d2 = mk_diameter(kTwo, LipNormSpec::scaled(2.0, two_point_lipnorm()), SolverConfig{});
  EXPECT_NEAR(d2.value, 0.5, 1e-9);
}

TEST(MkDiameter, BoundsDistances) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec l = random_dirac(8, 2);
  const auto diam = mk_diameter(alg, l, SolverConfig{});
  EXPECT_LE(diam.value, *diam.hi);
  for (int s = 0; s < 30; ++s) {
    const double v = mk_distance(alg, l, random_state(300 + s, 2), random_state(400 + s, 2), SolverConfig{}).value;
    EXPECT_LE(v, diam.value + 2e-6);
  }
}

TEST(HausLip, IdenticalIsZero) {
  const auto r = hauslip(AlgebraSpec::full(2), random_dirac(9, 2), random_dirac(9, 2), std::nullopt, fast_cfg());
  EXPECT_EQ(r.value, 0.0);
}

TEST(HausLip, TwoPointScaled) {
  for (double lambda : {0.5, 2.0, 5.0}) {
    const auto first = hauslip(kTwo, two_point_lipnorm(), LipNormSpec::scaled(lambda, two_point_lipnorm()), kFirst, fast_cfg());
    EXPECT_NEAR(first.value, std::abs(1.0 - 1.0 / lambda), 1e-6);
    const auto mixed = hauslip(kTwo, two_point_lipnorm(), LipNormSpec::scaled(lambda, two_point_lipnorm()), std::nullopt, fast_cfg());
    EXPECT_NEAR(mixed.value, 0.5 * std::abs(1.0 - 1.0 / lambda), 1e-6);
  }
}

TEST(HausLip, SymmetryAndTriangle) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const SolverConfig cfg = fast_cfg();
  for (int s = 0; s < 3; ++s) {
    const LipNormSpec a = random_dirac(500 + s, 2), b = random_dirac(600 + s, 2), c = random_dirac(700 + s, 2);
    const auto ab = hauslip(alg, a, b, std::nullopt, cfg), ba = hauslip(alg, b, a, std::nullopt, cfg);
    const auto bc = hauslip(alg, b, c, std::nullopt, cfg), ac = hauslip(alg, a, c, std::nullopt, cfg);
    EXPECT_EQ(ab.value, ba.value);
    const double mesh = std::max({*ab.hi - ab.value, *bc.hi - bc.value, *ac.hi - ac.value});
    EXPECT_LE(ac.value, ab.value + bc.value + 3.0 * (mesh + cfg.tol));
  }
}

TEST(Bridge, IdentityBridgeEqualsHauslip) {
  const SolverConfig cfg = fast_cfg();
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec a = random_dirac(800, 2), b = random_dirac(801, 2);
  const BridgeSides sides{alg, a, alg, b, std::nullopt, std::nullopt};
  const auto reach = bridge_reach(BridgeSpec::identity(alg), sides, cfg);
  const auto h = hauslip(alg, a, b, std::nullopt, cfg);
  EXPECT_NEAR(reach.value, h.value, 2.0 * cfg.tol * std::max(1.0, h.value) + 1e-9);
  EXPECT_EQ(bridge_height(BridgeSpec::identity(alg), sides, cfg).value, 0.0);
}

TEST(Bridge, IdentityBridgeSameLipNormIsZero) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec a = random_dirac(810, 2);
  const auto len = bridge_length(BridgeSpec::identity(alg), BridgeSides{alg, a, alg, a, std::nullopt, std::nullopt}, fast_cfg());
  EXPECT_LE(len.value, 1e-5);
}

TEST(Bridge, PhasePivotLeavesReachUnchanged) {
  const SolverConfig cfg = fast_cfg();
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const BridgeSides sides{alg, random_dirac(820, 2), alg, random_dirac(821, 2), std::nullopt, std::nullopt};
  BridgeSpec b = BridgeSpec::identity(alg);
  b.omega = HermitianMatrix::diagonal({1.0, -1.0}).matrix();
  const double base = bridge_reach(b, sides, cfg).value;
  b.omega *= std::polar(1.0, 0.7);
  const double phased = bridge_reach(b, sides, cfg).value;
  EXPECT_NEAR(phased, base, 2.0 * cfg.tol * std::max(1.0, base));
  // The phased pivot has no fixed vector, so it is not a bridge for heights.
  EXPECT_THROW(bridge_height(b, sides, cfg), Error);
}

TEST(Bridge, RankOneProjectionHeight) {
  // The 1-level set is the point mass at the first point; the farthest state
  // is the second point at mk distance 1.
  BridgeSpec b = BridgeSpec::identity(kTwo);
  b.omega = HermitianMatrix::diagonal({1.0, 0.0}).matrix();
  const LipNormSpec l = two_point_lipnorm();
  const BridgeSides sides{kTwo, l, kTwo, l, std::nullopt, std::nullopt};
  EXPECT_NEAR(bridge_height(b, sides, fast_cfg()).value, 1.0, 1e-6);
  const BridgeSides scaled{kTwo, LipNormSpec::scaled(2.0, l), kTwo, LipNormSpec::scaled(2.0, l), std::nullopt, std::nullopt};
  EXPECT_NEAR(bridge_height(b, scaled, fast_cfg()).value, 0.5, 1e-6);
}

TEST(Bridge, InvalidPivots) {
  BridgeSpec b = BridgeSpec::identity(kTwo);
  b.omega = HermitianMatrix::diagonal({0.5, 2.0}).matrix();
  try {
    b.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidBridge);
  }
  b.omega = CMatrix::Identity(2, 2);
  b.omega(0, 1) = 1.0;
  EXPECT_THROW(b.validate(), Error);
}

TEST(Bridge, PropinquityAggregate) {
  const SolverConfig cfg = fast_cfg();
  const LipNormSpec l = two_point_lipnorm();
  const BridgeSides sides{kTwo, l, kTwo, LipNormSpec::scaled(2.0, l), kFirst, kFirst};
  const BridgeSpec id = BridgeSpec::identity(kTwo);
  const auto single = propinquity_upper_bound({id}, sides, cfg);
  EXPECT_NEAR(single.value, 0.5, 1e-6);
  EXPECT_EQ(single.kind, ReportKind::UpperBound);
  BridgeSpec worse = id;
  worse.omega = HermitianMatrix::diagonal({1.0, 0.0}).matrix();
  EXPECT_LE(propinquity_upper_bound({id, worse}, sides, cfg).value, single.value);
  EXPECT_THROW(propinquity_upper_bound({}, sides, cfg), Error);
}

TEST(Dilation, IdentityAndScaled) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec l = random_dirac(900, 2);
  const UnitaryMap id = UnitaryMap::identity(2);
  EXPECT_NEAR(dilation(id, alg, l, l, fast_cfg()).value, 1.0, 1e-9);
  EXPECT_NEAR(dilation(id, alg, l, LipNormSpec::scaled(3.0, l), fast_cfg()).value, 3.0, 1e-8);
}

TEST(Dilation, ChainProduct) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const SolverConfig cfg = fast_cfg();
  for (int s = 0; s < 3; ++s) {
    const LipNormSpec a = random_dirac(910 + s, 2), b = random_dirac(920 + s, 2);
    const UnitaryMap u = random_unitary(930 + s, 2);
    const double fwd = dilation(u, alg, a, b, cfg).value, back = dilation(u.inverse(), alg, b, a, cfg).value;
    EXPECT_GE(fwd * back, 1.0 - 4.0 * cfg.tol);
  }
}

TEST(Dilation, NonUnitalMapRejected) {
  try {
    dilation([](const CMatrix& a) { return CMatrix(2.0 * a); }, kTwo, two_point_lipnorm(), kTwo, two_point_lipnorm(), fast_cfg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Contract);
  }
}

TEST(EquivalenceConstant, Basic) {
  const AlgebraSpec alg = AlgebraSpec::full(3);
  const LipNormSpec l = random_dirac(940, 3);
  EXPECT_NEAR(best_equivalence_constant(alg, l, l, fast_cfg()).value, 1.0, 1e-9);
  EXPECT_NEAR(best_equivalence_constant(alg, l, LipNormSpec::scaled(2.5, l), fast_cfg()).value, 2.5, 1e-8);
  const LipNormSpec m = random_dirac(941, 3);
  const double c12 = best_equivalence_constant(alg, l, m, fast_cfg()).value;
  const double c21 = best_equivalence_constant(alg, m, l, fast_cfg()).value;
  EXPECT_TRUE(std::isfinite(c12) && std::isfinite(c21));
  EXPECT_GE(c12 * c21, 1.0 - 4.0 * fast_cfg().tol);
}

TEST(MkLength, Basics) {
  const LipNormSpec l = two_point_lipnorm();
  EXPECT_EQ(mk_length(UnitaryMap::identity(2), kTwo, l, fast_cfg()).value, 0.0);
  EXPECT_NEAR(mk_length(UnitaryMap(swap_matrix()), kTwo, l, fast_cfg()).value, 1.0, 1e-9);
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec m = random_dirac(950, 2);
  const UnitaryMap u = random_unitary(951, 2);
  const SolverConfig cfg = fast_cfg();
  EXPECT_NEAR(mk_length(u, alg, m, cfg).value, mk_length(u.inverse(), alg, m, cfg).value, 2e-6 * std::max(1.0, mk_length(u, alg, m, cfg).value) + 1e-3);
}

TEST(LipschitzDistance, SameIsZeroAndScaled) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec l = random_dirac(960, 2);
  SolverConfig cfg = fast_cfg();
  const auto same = lipschitz_distance(alg, l, l, cfg);
  EXPECT_NEAR(same.report.value, 0.0, 1e-9);
  for (double lambda : {0.5, 2.0}) {
    const auto r = lipschitz_distance(alg, l, LipNormSpec::scaled(lambda, l), cfg);
    EXPECT_NEAR(r.report.value, std::abs(std::log(lambda)), 0.02 * std::abs(std::log(lambda)));
    EXPECT_EQ(r.report.kind, ReportKind::UpperBound);
  }
}

TEST(LipschitzDistance, ExactSymmetry) {
  const AlgebraSpec alg = AlgebraSpec::full(2);
  const LipNormSpec a = random_dirac(970, 2), b = random_dirac(971, 2);
  const auto ab = lipschitz_distance(alg, a, b, fast_cfg());
  const auto ba = lipschitz_distance(alg, b, a, fast_cfg());
  EXPECT_EQ(ab.report.value, ba.report.value);
  EXPECT_NEAR((ab.best_unitary.matrix() - ba.best_unitary.inverse().matrix()).norm(), 0.0, 1e-14);
}

TEST(LipschitzDistance, MultiBlockUnsupported) {
  try {
    lipschitz_distance(kTwo, two_point_lipnorm(), two_point_lipnorm(), fast_cfg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
}

TEST(Bounds, LipdPropinquityBound) {
  EXPECT_EQ(lipd_propinquity_bound(0.0, 1.0, 2.0), 0.0);
  EXPECT_NEAR(lipd_propinquity_bound(std::log(2.0), 1.0, 0.5), 1.0 * 1.5, 1e-15);
}

TEST(Bounds, CurvedBoundScalar) {
  RMatrix h(1, 1), h2(1, 1);
  h << 2.0;
  h2 << 2.0;
  EXPECT_EQ(curved_bound(h, h2, 1.0), 0.0);
  h2 << 4.0;
  // m = 1: lead = max(|1 - 2|, |1 - 1/2|) = 1; inner = max(1/(1+1/2), 1/(1+3/4)) = 2/3.
  EXPECT_NEAR(curved_bound(h, h2, 3.0), 1.0 * (1.0 + 0.5 * (2.0 / 3.0) * 3.0), 1e-15);
}
