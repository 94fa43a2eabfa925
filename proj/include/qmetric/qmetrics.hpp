#pragma once

// Metric quantities on finite-dimensional quantum compact metric spaces:
// Monge-Kantorovich distances and diameters, Hausdorff distances between
// Lip-balls, bridge-based propinquity bounds, dilations, the Lipschitz
// distance and the mk length function on automorphisms.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "qmetric/convex_engine.hpp"

namespace qmetric {

// ---------------------------------------------------------------------------
// Reports

/// Ordered from strongest to weakest guarantee.
enum class ReportKind { ExactWithinTol = 0, Interval = 1, UpperBound = 2, LowerEstimate = 3 };

inline const char* to_string(ReportKind k) {
  switch (k) {
    case ReportKind::ExactWithinTol: return "exact-within-tol";
    case ReportKind::Interval: return "interval";
    case ReportKind::UpperBound: return "upper-bound";
    case ReportKind::LowerEstimate: return "lower-estimate";
  }
  return "unknown";
}

inline ReportKind weakest(ReportKind a, ReportKind b) { return static_cast<int>(a) >= static_cast<int>(b) ? a : b; }

/// Flags are plain names for taints ("nonconverged", "log-floor"),
/// "warn:..." for warnings and "info:..." for disclosures.
struct MetricReport {
  double value = 0.0;
  ReportKind kind = ReportKind::ExactWithinTol;
  std::optional<double> lo;
  std::optional<double> hi;
  std::vector<std::string> flags;
  std::string provenance;

  bool tainted() const {
    return std::any_of(flags.begin(), flags.end(), [](const std::string& f) { return f.find(':') == std::string::npos; });
  }

  void add_flag(const std::string& f) {
    if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
  }

  /// Adopt the kind and taints of a contributing report.
  void absorb(const MetricReport& other) {
    kind = weakest(kind, other.kind);
    for (const auto& f : other.flags)
      if (f.rfind("info:", 0) != 0) add_flag(f);
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline MetricReport make_report(const char* op, const SolverConfig& cfg, double value, ReportKind kind) {
  MetricReport r;
  r.value = value;
  r.kind = kind;
  r.provenance = std::string(op) + "@" + cfg.hash();
  return r;
}

inline void require_lipnorm(const AlgebraSpec& algebra, const LipNormSpec& l, const char* op) {
  algebra.validate();
  const HermitianBasis basis(algebra);
  validate_lipnorm(l, algebra.total_dim());
  if (basis.traceless_size() > 0) {
    // sigma_min of the realified map certifies the kernel cheaply.
    const auto images = lip_images(l, basis);
    Eigen::JacobiSVD<RMatrix> svd(realify(images));
    const RVector& sv = svd.singularValues();
    const double rank = static_cast<double>(std::min(images.front().rows(), images.front().cols()));
    if (sv.size() == basis.traceless_size() && sv(sv.size() - 1) / std::sqrt(rank) > kKernelThreshold) return;
  }
  const auto check = kernel_check(l, basis);
  require(check.is_lipnorm, ErrorKind::NotALipNorm,
          std::string(op) + ": seminorm vanishes off the scalars (min on the traceless sphere " +
              fmt_double(check.min_value) + ")");
}

inline bool matrix_less(const CMatrix& a, const CMatrix& b) {
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const cplx x = a.data()[k], y = b.data()[k];
    if (x.real() != y.real()) return x.real() < y.real();
    if (x.imag() != y.imag()) return x.imag() < y.imag();
  }
  return false;
}

inline BallSpec sliced_ball(const AlgebraSpec& algebra, const LipNormSpec& l,
                            std::optional<DensityState> slice = std::nullopt) {
  if (!slice) slice = DensityState::maximally_mixed(algebra.total_dim());
  return BallSpec{algebra, l, 1.0, slice};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Monge-Kantorovich metric

inline MetricReport mk_distance(const AlgebraSpec& algebra, const LipNormSpec& l, const DensityState& rho,
                                const DensityState& sigma, const SolverConfig& cfg) {
  cfg.validate();
  detail::require_lipnorm(algebra, l, "mk_distance");
  require(rho.dim() == algebra.total_dim() && sigma.dim() == algebra.total_dim(), ErrorKind::Shape,
          "mk_distance: state dimension mismatch");
  // Canonical argument order makes the result exactly symmetric.
  const bool swap = detail::matrix_less(sigma.matrix(), rho.matrix());
  const CMatrix diff = swap ? CMatrix(sigma.matrix() - rho.matrix()) : CMatrix(rho.matrix() - sigma.matrix());
  const LipBall ball(BallSpec{algebra, l, 1.0, std::nullopt});
  const HermitianMatrix c(diff);
  const auto res = detail::max_linear_coords(ball, detail::linear_coefficients(ball, c.matrix()), cfg.tol, cfg.max_iter);
  MetricReport r = detail::make_report("mk_distance", cfg, res.value,
                                       res.converged ? ReportKind::ExactWithinTol : ReportKind::Interval);
  r.lo = res.value;
  r.hi = res.certificate;
  if (!res.converged) r.add_flag("nonconverged");
  return r;
}

/// max over the unit ball of the spectral spread. The upper end of the
/// interval is certified: spread(a) <= sqrt2 ||y||_2 for the traceless part,
/// and |y_k| is bounded by the dual certificate of max y_k over the ball.
inline MetricReport mk_diameter(const AlgebraSpec& algebra, const LipNormSpec& l, const SolverConfig& cfg) {
  cfg.validate();
  detail::require_lipnorm(algebra, l, "mk_diameter");
  const LipBall ball(detail::sliced_ball(algebra, l));
  const detail::CoordFunctional g(ConvexFunctional::spread(), ball);
  const auto best = detail::max_convex_coords(g, ball, cfg);
  bool converged = best.converged;
  double sum = 0.0;
  for (int k = 0; k < ball.dim(); ++k) {
    RVector e = RVector::Zero(ball.dim());
    e(k) = 1.0;
    const auto axis = detail::max_linear_coords(ball, e, cfg.tol, cfg.max_iter);
    converged = converged && axis.converged;
    sum += axis.certificate * axis.certificate;
  }
  MetricReport r = detail::make_report("mk_diameter", cfg, best.value, ReportKind::LowerEstimate);
  r.lo = best.value;
  r.hi = std::max(best.value, std::sqrt(2.0 * sum));
  if (!converged) r.add_flag("nonconverged");
  return r;
}

// ---------------------------------------------------------------------------
// Hausdorff distances between Lip-balls

namespace detail {

inline std::vector<RVector> direction_net(int d, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RVector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    RVector u(d);
    for (int k = 0; k < d; ++k) u(k) = rng.normal();
    const double n = u.norm();
    out.push_back(n > 0.0 ? RVector(u / n) : u);
  }
  return out;
}

/// Exposed points of a ball along a direction net, plus an estimate of how
/// far any exposed point can be from the sampled ones (probed along fresh
/// directions) measured in the operator norm of `image` of the difference.
struct ExtremeSet {
  std::vector<RVector> coords;
  double mesh = 0.0;
  bool converged = true;
};

inline ExtremeSet extreme_points(const LipBall& ball, const std::vector<RVector>& dirs,
                                 const std::vector<RVector>& probes,
                                 const std::function<CMatrix(const RVector&)>& image, const SolverConfig& cfg) {
  ExtremeSet out;
  const double dedup = 1e-9 * std::max(1.0, ball.circumradius());
  for (const auto& u : dirs) {
    const auto r = max_linear_coords(ball, u, cfg.tol, cfg.max_iter);
    out.converged = out.converged && r.converged;
    const bool seen = std::any_of(out.coords.begin(), out.coords.end(),
                                  [&](const RVector& y) { return (y - r.coords).norm() <= dedup; });
    if (!seen) out.coords.push_back(r.coords);
  }
  for (const auto& v : probes) {
    const auto r = max_linear_coords(ball, v, cfg.tol, cfg.max_iter);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& y : out.coords) nearest = std::min(nearest, operator_norm(image(RVector(r.coords - y))));
    out.mesh = std::max(out.mesh, nearest);
  }
  return out;
}

struct Directed {
  double value = 0.0;
  bool converged = true;
};

/// max over the sampled points x of min over the target ball of ||x - image(z)||.
inline Directed directed_distance(const std::vector<CMatrix>& points, const LipBall& target,
                                  const std::vector<CMatrix>& target_terms, const SolverConfig& cfg,
                                  const std::function<bool(std::size_t)>& inside = {}) {
  Directed out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (inside && inside(i)) continue;
    // Any lower bound above the running max cannot change it, but the exact
    // value is cheap enough at desk scale.
    const auto res = min_distance_general(target, points[i], target_terms, {}, cfg.tol, cfg.max_iter);
    out.converged = out.converged && res.converged;
    out.value = std::max(out.value, res.dist);
  }
  return out;
}

inline std::vector<RVector> hausdorff_probes(int d, const SolverConfig& cfg) {
  return direction_net(d, std::max(8, cfg.hausdorff_directions / 4), sub_seed(cfg.seed, 0x70726f62ULL));
}

/// Precomputed side of a HausLip comparison, reusable across many pairs.
struct HausSide {
  LipBall ball;
  ExtremeSet extremes;
};

inline HausSide haus_side(const AlgebraSpec& algebra, const LipNormSpec& l, const DensityState& phi,
                          const SolverConfig& cfg) {
  HausSide side{LipBall(BallSpec{algebra, l, 1.0, phi}), {}};
  const int d = side.ball.dim();
  const auto dirs = direction_net(d, cfg.hausdorff_directions, sub_seed(cfg.seed, 0x68617573ULL));
  const LipBall& b = side.ball;
  side.extremes = extreme_points(b, dirs, hausdorff_probes(d, cfg), [&b](const RVector& y) { return b.element(y); }, cfg);
  return side;
}

inline MetricReport hauslip_sides(const HausSide& s1, const HausSide& s2, const SolverConfig& cfg) {
  auto directed = [&](const HausSide& from, const HausSide& to) {
    std::vector<CMatrix> pts;
    for (const auto& y : from.extremes.coords) pts.push_back(from.ball.element(y));
    // Both balls share basis and slice, so coordinates are interchangeable.
    return directed_distance(pts, to.ball, to.ball.element_terms(), cfg, [&](std::size_t i) {
      return to.ball.lip(from.extremes.coords[i]) <= to.ball.radius() * (1.0 + 1e-12);
    });
  };
  const Directed d12 = directed(s1, s2);
  const Directed d21 = directed(s2, s1);
  const double value = std::max(d12.value, d21.value);
  const double mesh = std::max(s1.extremes.mesh, s2.extremes.mesh);
  MetricReport r = make_report("hauslip", cfg, value, ReportKind::LowerEstimate);
  r.lo = value;
  r.hi = value + mesh;
  r.add_flag("info:mesh=" + fmt_double(mesh));
  r.add_flag("info:directions=" + std::to_string(cfg.hausdorff_directions));
  if (!(d12.converged && d21.converged && s1.extremes.converged && s2.extremes.converged)) r.add_flag("nonconverged");
  return r;
}

}  // namespace detail

/// Hausdorff distance between the phi-sliced unit balls of L1 and L2.
/// Extreme points come from a seeded direction net shared by both sides, so
/// hauslip(L1, L2) and hauslip(L2, L1) run identical computations.
inline MetricReport hauslip(const AlgebraSpec& algebra, const LipNormSpec& l1, const LipNormSpec& l2,
                            const std::optional<DensityState>& phi, const SolverConfig& cfg) {
  cfg.validate();
  detail::require_lipnorm(algebra, l1, "hauslip");
  detail::require_lipnorm(algebra, l2, "hauslip");
  const DensityState slice = phi ? *phi : DensityState::maximally_mixed(algebra.total_dim());
  require(slice.dim() == algebra.total_dim(), ErrorKind::Shape, "hauslip: slice state dimension mismatch");
  const auto s1 = detail::haus_side(algebra, l1, slice, cfg);
  const auto s2 = detail::haus_side(algebra, l2, slice, cfg);
  return detail::hauslip_sides(s1, s2, cfg);
}

// ---------------------------------------------------------------------------
// Bridges

/// A unital *-monomorphism of a block algebra into M_N: a block-diagonal
/// placement of source blocks (each block index may repeat, every block must
/// appear), optionally followed by conjugation with a unitary.
struct Embedding {
  AlgebraSpec source;
  std::vector<int> block_map;
  std::optional<CMatrix> unitary;

  static Embedding identity(const AlgebraSpec& algebra) {
    Embedding e{algebra, {}, std::nullopt};
    for (std::size_t i = 0; i < algebra.blocks.size(); ++i) e.block_map.push_back(static_cast<int>(i));
    return e;
  }

  int target_dim() const {
    int n = 0;
    for (int b : block_map) n += source.blocks[static_cast<std::size_t>(b)];
    return n;
  }

  void validate() const {
    source.validate();
    require(!block_map.empty(), ErrorKind::InvalidInput, "Embedding: empty block map");
    std::vector<bool> used(source.blocks.size(), false);
    for (int b : block_map) {
      require(b >= 0 && b < static_cast<int>(source.blocks.size()), ErrorKind::InvalidInput,
              "Embedding: block index out of range");
      used[static_cast<std::size_t>(b)] = true;
    }
    require(std::all_of(used.begin(), used.end(), [](bool u) { return u; }), ErrorKind::InvalidInput,
            "Embedding: every source block must appear (faithfulness)");
    if (unitary) (void)UnitaryMap(*unitary);
    require(!unitary || unitary->rows() == target_dim(), ErrorKind::Shape, "Embedding: unitary size mismatch");
  }

  CMatrix apply(const CMatrix& a) const {
    const std::vector<int> offsets = [&] {
      std::vector<int> o(1, 0);
      for (int b : source.blocks) o.push_back(o.back() + b);
      return o;
    }();
    const int n = target_dim();
    CMatrix out = CMatrix::Zero(n, n);
    int pos = 0;
    for (int b : block_map) {
      const int sz = source.blocks[static_cast<std::size_t>(b)];
      const int off = offsets[static_cast<std::size_t>(b)];
      out.block(pos, pos, sz, sz) = a.block(off, off, sz, sz);
      pos += sz;
    }
    if (unitary) out = (*unitary) * out * unitary->adjoint();
    return out;
  }
};

struct BridgeSpec {
  int ambient_dim = 0;
  CMatrix omega;
  Embedding embed_a;
  Embedding embed_b;

  static BridgeSpec identity(const AlgebraSpec& algebra) {
    return BridgeSpec{algebra.total_dim(), identity_matrix(algebra.total_dim()), Embedding::identity(algebra),
                      Embedding::identity(algebra)};
  }

  /// Isometry onto ker(omega - 1), the support of the 1-level set.
  CMatrix level_isometry() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (omega + omega.adjoint()));
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k)
      if (std::abs(eig.eigenvalues()(k) - 1.0) <= 1e-10) cols.push_back(k);
    CMatrix v(ambient_dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(cols[j]);
    return v;
  }

  /// Shapes, finiteness and embeddings; enough for the reach.
  void validate_structure() const {
    require(ambient_dim >= 1, ErrorKind::InvalidInput, "BridgeSpec: ambient_dim must be >= 1");
    require(omega.rows() == ambient_dim && omega.cols() == ambient_dim, ErrorKind::Shape, "BridgeSpec: pivot size");
    require(all_finite(omega), ErrorKind::InvalidInput, "BridgeSpec: non-finite pivot");
    embed_a.validate();
    embed_b.validate();
    require(embed_a.target_dim() == ambient_dim && embed_b.target_dim() == ambient_dim, ErrorKind::Shape,
            "BridgeSpec: embeddings must be unital into the ambient algebra");
  }

  /// Full check, including a nonempty 1-level set.
  void validate() const {
    validate_structure();
    require(detail::is_hermitian(omega), ErrorKind::InvalidBridge,
            "BridgeSpec: the 1-level set is only characterized for Hermitian pivots");
    require(level_isometry().cols() > 0, ErrorKind::InvalidBridge, "BridgeSpec: empty 1-level set (1 is not an eigenvalue of omega)");
  }
};

namespace detail {

/// The point omega is applied on the right of the A side and on the left of the B side.
struct ReachSide {
  LipBall ball;
  std::vector<CMatrix> terms;  // images of the element terms in the ambient algebra
  ExtremeSet extremes;
};

inline ReachSide reach_side(const AlgebraSpec& algebra, const LipNormSpec& l, const DensityState& slice,
                            const Embedding& emb, const CMatrix& omega, bool omega_right, const SolverConfig& cfg) {
  ReachSide side{LipBall(BallSpec{algebra, l, 1.0, slice}), {}, {}};
  for (const auto& e : side.ball.element_terms()) {
    const CMatrix p = emb.apply(e);
    side.terms.push_back(omega_right ? CMatrix(p * omega) : CMatrix(omega * p));
  }
  const int d = side.ball.dim();
  const auto dirs = direction_net(d, cfg.hausdorff_directions, sub_seed(cfg.seed, 0x68617573ULL));
  const auto& terms = side.terms;
  side.extremes = extreme_points(side.ball, dirs, hausdorff_probes(d, cfg), [&terms](const RVector& y) { return combine(terms, y); }, cfg);
  return side;
}

/// sup over pure states mu of max_{L(a) <= 1} mu(a) - lambda_max(V* pi(a) V):
/// the mk distance from mu to the closest pulled-back 1-level state.
inline MetricReport height_side(const AlgebraSpec& algebra, const LipNormSpec& l, const Embedding& emb,
                                const CMatrix& v, const SolverConfig& cfg, std::uint64_t stream) {
  MetricReport r = make_report("bridge_height", cfg, 0.0, ReportKind::LowerEstimate);
  const int n_amb = emb.target_dim();
  if (v.cols() == n_amb) return r;  // the 1-level set is every state
  const LipBall ball(BallSpec{algebra, l, 1.0, std::nullopt});
  const int d = ball.dim();
  if (d == 0) return r;
  std::vector<CMatrix> compressed;
  double mass = 0.0;
  for (const auto& e : ball.element_terms()) {
    compressed.push_back(v.adjoint() * emb.apply(e) * v);
    mass += std::pow(operator_norm(e), 2);
  }
  const double sbox = ball.circumradius() * std::sqrt(mass) + 1.0;
  const double box = ball.circumradius() * (1.0 + 1e-9);
  bool converged = true;
  double best = 0.0;
  for (int s = 0; s < cfg.height_samples; ++s) {
    const DensityState mu = random_pure_state(sub_seed(cfg.seed, stream + static_cast<std::uint64_t>(s)), algebra);
    CuttingPlaneProblem prob;
    prob.objective = RVector::Zero(d + 1);
    prob.objective.head(d) = linear_coefficients(ball, mu.matrix());
    prob.objective(d) = -1.0;
    prob.lower = RVector::Constant(d + 1, -box);
    prob.upper = RVector::Constant(d + 1, box);
    prob.lower(d) = -sbox;
    prob.upper(d) = sbox;
    NormConstraint level;
    level.kind = NormKind::MaxEigen;
    level.offset = CMatrix::Zero(v.cols(), v.cols());
    for (int k = 0; k < d; ++k) level.terms.emplace_back(k, compressed[static_cast<std::size_t>(k)]);
    level.rhs_terms.emplace_back(d, 1.0);
    NormConstraint lip;
    lip.kind = NormKind::Operator;
    lip.offset = CMatrix::Zero(ball.images().front().rows(), ball.images().front().cols());
    for (int k = 0; k < d; ++k) lip.terms.emplace_back(k, ball.images()[static_cast<std::size_t>(k)]);
    lip.rhs_const = 1.0;
    prob.constraints = {level, lip};
    auto repair = [&](const RVector& z) -> std::optional<RVector> {
      RVector fixed = z;
      const double lz = ball.lip(z.head(d));
      if (lz > 1.0) fixed.head(d) /= lz;
      fixed(d) = 0.0;
      fixed(d) = norm_kind_value(NormKind::MaxEigen, level.eval(fixed));
      return fixed;
    };
    const auto res = solve_cutting_plane(prob, repair, RVector::Zero(d + 1), cfg.tol, cfg.max_iter);
    converged = converged && res.converged;
    best = std::max(best, res.value);
  }
  r.value = best;
  r.lo = best;
  r.add_flag("info:samples=" + std::to_string(cfg.height_samples));
  if (!converged) r.add_flag("nonconverged");
  return r;
}

}  // namespace detail

struct BridgeSides {
  AlgebraSpec algebra_a;
  LipNormSpec lip_a;
  AlgebraSpec algebra_b;
  LipNormSpec lip_b;
  /// Slice states for the reach computation (maximally mixed when absent).
  std::optional<DensityState> slice_a;
  std::optional<DensityState> slice_b;
};

/// Hausdorff distance in the ambient norm between {pi_A(a) omega} and
/// {omega pi_B(b)} over the sliced unit balls.
inline MetricReport bridge_reach(const BridgeSpec& bridge, const BridgeSides& sides, const SolverConfig& cfg) {
  cfg.validate();
  bridge.validate_structure();
  require(bridge.embed_a.source == sides.algebra_a && bridge.embed_b.source == sides.algebra_b, ErrorKind::Shape,
          "bridge_reach: embeddings do not match the algebras");
  detail::require_lipnorm(sides.algebra_a, sides.lip_a, "bridge_reach");
  detail::require_lipnorm(sides.algebra_b, sides.lip_b, "bridge_reach");
  const DensityState sa = sides.slice_a ? *sides.slice_a : DensityState::maximally_mixed(sides.algebra_a.total_dim());
  const DensityState sb = sides.slice_b ? *sides.slice_b : DensityState::maximally_mixed(sides.algebra_b.total_dim());
  const auto a = detail::reach_side(sides.algebra_a, sides.lip_a, sa, bridge.embed_a, bridge.omega, true, cfg);
  const auto b = detail::reach_side(sides.algebra_b, sides.lip_b, sb, bridge.embed_b, bridge.omega, false, cfg);
  auto points = [](const detail::ReachSide& s) {
    std::vector<CMatrix> out;
    for (const auto& y : s.extremes.coords) out.push_back(detail::combine(s.terms, y));
    return out;
  };
  const auto dab = detail::directed_distance(points(a), b.ball, b.terms, cfg);
  const auto dba = detail::directed_distance(points(b), a.ball, a.terms, cfg);
  const double value = std::max(dab.value, dba.value);
  const double mesh = std::max(a.extremes.mesh, b.extremes.mesh);
  MetricReport r = detail::make_report("bridge_reach", cfg, value, ReportKind::LowerEstimate);
  r.lo = value;
  r.hi = value + mesh;
  r.add_flag("info:mesh=" + detail::fmt_double(mesh));
  if (!(dab.converged && dba.converged && a.extremes.converged && b.extremes.converged)) r.add_flag("nonconverged");
  return r;
}

inline MetricReport bridge_height(const BridgeSpec& bridge, const BridgeSides& sides, const SolverConfig& cfg) {
  cfg.validate();
  bridge.validate();
  detail::require_lipnorm(sides.algebra_a, sides.lip_a, "bridge_height");
  detail::require_lipnorm(sides.algebra_b, sides.lip_b, "bridge_height");
  const CMatrix v = bridge.level_isometry();
  const auto ha = detail::height_side(sides.algebra_a, sides.lip_a, bridge.embed_a, v, cfg, 0x41000000ULL);
  const auto hb = detail::height_side(sides.algebra_b, sides.lip_b, bridge.embed_b, v, cfg, 0x42000000ULL);
  MetricReport r = detail::make_report("bridge_height", cfg, std::max(ha.value, hb.value), ReportKind::LowerEstimate);
  r.lo = r.value;
  r.absorb(ha);
  r.absorb(hb);
  if (v.cols() < bridge.ambient_dim) r.add_flag("info:samples=" + std::to_string(cfg.height_samples));
  return r;
}

namespace detail {

inline MetricReport length_from(const MetricReport& reach, const MetricReport& height, const SolverConfig& cfg) {
  MetricReport r = detail::make_report("bridge_length", cfg, std::max(reach.value, height.value), ReportKind::LowerEstimate);
  r.lo = r.value;
  if (reach.hi) r.hi = std::max(*reach.hi, height.value);
  r.absorb(reach);
  r.absorb(height);
  r.add_flag("info:reach=" + detail::fmt_double(reach.value));
  r.add_flag("info:height=" + detail::fmt_double(height.value));
  return r;
}

}  // namespace detail

inline MetricReport bridge_length(const BridgeSpec& bridge, const BridgeSides& sides, const SolverConfig& cfg) {
  return detail::length_from(bridge_reach(bridge, sides, cfg), bridge_height(bridge, sides, cfg), cfg);
}

/// min over the supplied bridges of their lengths, checked against the
/// larger diameter (which always bounds the propinquity).
inline MetricReport propinquity_upper_bound(const std::vector<BridgeSpec>& bridges, const BridgeSides& sides,
                                            const SolverConfig& cfg) {
  require(!bridges.empty(), ErrorKind::InvalidInput, "propinquity_upper_bound: no bridges supplied");
  MetricReport best;
  bool have = false;
  for (const auto& b : bridges) {
    const auto len = bridge_length(b, sides, cfg);
    if (!have || len.value < best.value) {
      best = len;
      have = true;
    }
  }
  const auto da = mk_diameter(sides.algebra_a, sides.lip_a, cfg);
  const auto db = mk_diameter(sides.algebra_b, sides.lip_b, cfg);
  const double diam_hi = std::max(da.hi.value_or(da.value), db.hi.value_or(db.value));
  MetricReport r = detail::make_report("propinquity_upper_bound", cfg, best.value, ReportKind::UpperBound);
  for (const auto& f : best.flags)
    if (f.rfind("info:", 0) != 0) r.add_flag(f);
  if (best.kind != ReportKind::ExactWithinTol) r.add_flag("info:components-estimated");
  if (best.value > diam_hi) {
    r.value = diam_hi;
    r.add_flag("warn:clamped-to-diameter");
  }
  r.hi = r.value;
  r.add_flag("info:max-diameter=" + detail::fmt_double(std::max(da.value, db.value)));
  return r;
}

// ---------------------------------------------------------------------------
// Dilation, equivalence constants, mk length

using LinearMatrixMap = std::function<CMatrix(const CMatrix&)>;

/// sup { L_B(map(a)) : L_A(a) <= 1 } for a unital linear map from A into B.
inline MetricReport dilation(const LinearMatrixMap& map, const AlgebraSpec& algebra_a, const LipNormSpec& lip_a,
                             const AlgebraSpec& algebra_b, const LipNormSpec& lip_b, const SolverConfig& cfg,
                             const std::vector<RVector>& warm_starts = {}, std::vector<RVector>* endpoints = nullptr) {
  cfg.validate();
  detail::require_lipnorm(algebra_a, lip_a, "dilation");
  detail::require_lipnorm(algebra_b, lip_b, "dilation");
  const CMatrix one = map(identity_matrix(algebra_a.total_dim()));
  require(one.rows() == algebra_b.total_dim() && one.cols() == one.rows(), ErrorKind::Shape, "dilation: map codomain");
  require((one - identity_matrix(algebra_b.total_dim())).norm() <= 1e-10, ErrorKind::Contract, "dilation: map is not unital");
  const LipBall ball(detail::sliced_ball(algebra_a, lip_a));
  for (const auto& e : ball.element_terms())
    require(algebra_b.contains(map(e)), ErrorKind::Contract, "dilation: map leaves the target algebra");
  const auto g = ConvexFunctional::operator_norm_of([&](const CMatrix& a) { return lip_image(lip_b, map(a)); });
  const detail::CoordFunctional cg(g, ball);
  const auto res = detail::max_convex_coords(cg, ball, cfg, warm_starts, endpoints);
  MetricReport r = detail::make_report("dilation", cfg, res.value, ReportKind::LowerEstimate);
  r.lo = res.value;
  if (!res.converged) r.add_flag("nonconverged");
  return r;
}

inline MetricReport dilation(const UnitaryMap& u, const AlgebraSpec& algebra, const LipNormSpec& lip_a,
                             const LipNormSpec& lip_b, const SolverConfig& cfg) {
  require(u.dim() == algebra.total_dim(), ErrorKind::Shape, "dilation: unitary dimension");
  return dilation([&u](const CMatrix& a) { return u.apply(a); }, algebra, lip_a, algebra, lip_b, cfg);
}

/// Least C with L2 <= C L1.
inline MetricReport best_equivalence_constant(const AlgebraSpec& algebra, const LipNormSpec& l1, const LipNormSpec& l2,
                                              const SolverConfig& cfg) {
  MetricReport r = dilation([](const CMatrix& a) { return a; }, algebra, l1, algebra, l2, cfg);
  r.provenance = "best_equivalence_constant@" + cfg.hash();
  return r;
}

/// sup { ||alpha(a) - a|| : L(a) <= 1 }.
inline MetricReport mk_length(const UnitaryMap& alpha, const AlgebraSpec& algebra, const LipNormSpec& l,
                              const SolverConfig& cfg) {
  cfg.validate();
  detail::require_lipnorm(algebra, l, "mk_length");
  require(alpha.dim() == algebra.total_dim(), ErrorKind::Shape, "mk_length: unitary dimension");
  const LipBall ball(detail::sliced_ball(algebra, l));
  for (const auto& e : ball.element_terms())
    require(algebra.contains(alpha.apply(e)), ErrorKind::Contract, "mk_length: map is not an automorphism of the algebra");
  const CMatrix u = alpha.matrix();
  const auto g = ConvexFunctional::operator_norm_of([u](const CMatrix& a) { return CMatrix(u * a * u.adjoint() - a); });
  const detail::CoordFunctional cg(g, ball);
  const auto res = detail::max_convex_coords(cg, ball, cfg);
  MetricReport r = detail::make_report("mk_length", cfg, res.value, ReportKind::LowerEstimate);
  r.lo = res.value;
  if (!res.converged) r.add_flag("nonconverged");
  return r;
}

// ---------------------------------------------------------------------------
// Lipschitz distance

struct LipschitzDistanceResult {
  MetricReport report;
  UnitaryMap best_unitary;
};

inline constexpr double kDilationFloor = 1e-12;

namespace detail {

inline std::string canonical_key(const LipNormSpec& l) {
  std::string out = l.variant_name() + "|";
  char buf[64];
  auto put_matrix = [&](const CMatrix& m) {
    std::snprintf(buf, sizeof buf, "%ldx%ld:", static_cast<long>(m.rows()), static_cast<long>(m.cols()));
    out += buf;
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g;", m.data()[k].real(), m.data()[k].imag());
      out += buf;
    }
  };
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiracCommutator>) {
          put_matrix(s.dirac);
          out += std::to_string(s.amplification);
        } else if constexpr (std::is_same_v<T, Perturbed>) {
          put_matrix(s.dirac);
          put_matrix(s.omega);
          out += std::to_string(s.amplification);
        } else if constexpr (std::is_same_v<T, Conformal>) {
          put_matrix(s.dirac);
          put_matrix(s.factor);
          out += std::to_string(s.amplification);
        } else if constexpr (std::is_same_v<T, Curved>) {
          for (const auto& x : s.generators) put_matrix(x);
          put_matrix(s.coefficients.template cast<cplx>());
        } else {
          std::snprintf(buf, sizeof buf, "%.17g|", s.lambda);
          out += buf;
          out += canonical_key(*s.inner);
        }
      },
      l.variant());
  return out;
}

/// Candidate unit-Lip elements used to approximate a dilation from below.
struct Candidates {
  std::vector<CMatrix> elements;  // L(element) = 1

  void add(const LipBall& ball, const RVector& y) {
    const double l = ball.lip(y);
    if (!(l > 0.0)) return;
    const CMatrix e = ball.element(y) / l;
    for (const auto& x : elements)
      if ((x - e).norm() <= 1e-9) return;
    elements.push_back(e);
  }
};

inline double log_objective(double dil_ab, double dil_ba, bool* floored) {
  if (dil_ab < kDilationFloor || dil_ba < kDilationFloor) *floored = true;
  return std::max(std::abs(std::log(std::max(dil_ab, kDilationFloor))),
                  std::abs(std::log(std::max(dil_ba, kDilationFloor))));
}

struct LipdEval {
  double value;
  double dil_ab;
  double dil_ba;
};

class LipdProblem {
 public:
  LipdProblem(const AlgebraSpec& algebra, const LipNormSpec& la, const LipNormSpec& lb, const SolverConfig& cfg)
      : algebra_(algebra), la_(la), lb_(lb), cfg_(cfg), ball_a_(sliced_ball(algebra, la)), ball_b_(sliced_ball(algebra, lb)),
        basis_(algebra) {
    Rng rng(sub_seed(cfg.seed, 0x6c697064ULL));
    const int d = ball_a_.dim();
    for (int k = 0; k < d; ++k) {
      RVector e = RVector::Zero(d);
      e(k) = 1.0;
      cand_a_.add(ball_a_, e);
      cand_b_.add(ball_b_, e);
    }
    for (int i = 0; i < 4 * d; ++i) {
      RVector y(d);
      for (int k = 0; k < d; ++k) y(k) = rng.normal();
      cand_a_.add(ball_a_, y);
      cand_b_.add(ball_b_, y);
    }
  }

  int chart_dim() const { return basis_.traceless_size(); }

  CMatrix step(const CMatrix& u, const RVector& k) const {
    return unitary_exp(HermitianMatrix(basis_.reconstruct_traceless(k))) * u;
  }

  LipdEval cheap(const CMatrix& u, bool* floored) const {
    double ab = 0.0, ba = 0.0;
    for (const auto& a : cand_a_.elements) ab = std::max(ab, operator_norm(lip_image(lb_, u * a * u.adjoint())));
    for (const auto& b : cand_b_.elements) ba = std::max(ba, operator_norm(lip_image(la_, u.adjoint() * b * u)));
    return {log_objective(ab, ba, floored), ab, ba};
  }

  /// Full dilation estimates at u; their maximizers join the candidate sets.
  LipdEval full(const CMatrix& u, bool* floored, bool* converged) {
    std::vector<RVector> ends_a, ends_b;
    const CMatrix ua = u;
    const auto dab = dilation([&ua](const CMatrix& a) { return CMatrix(ua * a * ua.adjoint()); }, algebra_, la_, algebra_,
                              lb_, cfg_, warm(cand_a_, ball_a_), &ends_a);
    const auto dba = dilation([&ua](const CMatrix& b) { return CMatrix(ua.adjoint() * b * ua); }, algebra_, lb_, algebra_,
                              la_, cfg_, warm(cand_b_, ball_b_), &ends_b);
    *converged = *converged && !dab.tainted() && !dba.tainted();
    for (const auto& y : ends_a) cand_a_.add(ball_a_, y);
    for (const auto& y : ends_b) cand_b_.add(ball_b_, y);
    return {log_objective(dab.value, dba.value, floored), dab.value, dba.value};
  }

 private:
  /// The best few candidates, as warm starts in ball coordinates.
  std::vector<RVector> warm(const Candidates& c, const LipBall& ball) const {
    std::vector<RVector> out;
    const std::size_t limit = 8;
    for (std::size_t i = c.elements.size(); i-- > 0 && out.size() < limit;)
      out.push_back(ball.coords(HermitianMatrix(c.elements[i])));
    return out;
  }

  AlgebraSpec algebra_;
  LipNormSpec la_, lb_;
  SolverConfig cfg_;
  LipBall ball_a_, ball_b_;
  HermitianBasis basis_;
  Candidates cand_a_, cand_b_;
};

/// Finite-difference descent on the unitary group through the chart
/// K -> exp(iK) U, with backtracking and a compass-search fallback at kinks.
inline std::pair<CMatrix, double> descend(const LipdProblem& p, CMatrix u, bool* floored) {
  const int m = p.chart_dim();
  double f = p.cheap(u, floored).value;
  double step = 0.25;
  for (int it = 0; it < 200 && step > 1e-7; ++it) {
    RVector g(m);
    const double h = 1e-6;
    for (int k = 0; k < m; ++k) {
      RVector e = RVector::Zero(m);
      e(k) = h;
      g(k) = (p.cheap(p.step(u, e), floored).value - p.cheap(p.step(u, -e), floored).value) / (2.0 * h);
    }
    bool moved = false;
    if (g.norm() > 1e-12) {
      const RVector dir = -g / g.norm();
      for (double t = step; t >= 1e-7; t *= 0.5) {
        const CMatrix trial = p.step(u, t * dir);
        const double ft = p.cheap(trial, floored).value;
        if (ft < f - 1e-12 * std::max(1.0, f)) {
          u = trial;
          f = ft;
          step = std::min(2.0 * t, 1.0);
          moved = true;
          break;
        }
      }
    }
    if (!moved) {
      for (int k = 0; k < m && !moved; ++k)
        for (double sgn : {1.0, -1.0}) {
          RVector e = RVector::Zero(m);
          e(k) = sgn * step;
          const CMatrix trial = p.step(u, e);
          const double ft = p.cheap(trial, floored).value;
          if (ft < f - 1e-12 * std::max(1.0, f)) {
            u = trial;
            f = ft;
            moved = true;
            break;
          }
        }
      if (!moved) step *= 0.5;
    }
  }
  return {u, f};
}

inline LipschitzDistanceResult lipschitz_distance_ordered(const AlgebraSpec& algebra, const LipNormSpec& la,
                                                          const LipNormSpec& lb, const SolverConfig& cfg) {
  const int n = algebra.total_dim();
  LipdProblem p(algebra, la, lb, cfg);
  bool floored = false, converged = true;
  CMatrix best_u = identity_matrix(n);
  LipdEval best_full = p.full(best_u, &floored, &converged);
  const double call_tol = 10.0 * cfg.tol;
  CMatrix incumbent = best_u;
  for (int round = 0; round < 8; ++round) {
    CMatrix round_u = incumbent;
    double round_f = std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.restarts + 1; ++s) {
      CMatrix start;
      if (s == 0)
        start = incumbent;
      else if (s == 1)
        start = identity_matrix(n);
      else
        start = random_unitary(sub_seed(cfg.seed, 0x75000000ULL + static_cast<std::uint64_t>(round * 1000 + s)), n).matrix();
      const auto [u, f] = descend(p, start, &floored);
      if (f < round_f - 1e-14) {
        round_f = f;
        round_u = u;
      }
    }
    const LipdEval at = p.full(round_u, &floored, &converged);
    if (at.value < best_full.value) {
      best_full = at;
      best_u = round_u;
    }
    incumbent = round_u;
    if (at.value <= round_f + call_tol * std::max(1.0, round_f)) break;
  }
  // Re-project for unitarity drift.
  Eigen::JacobiSVD<CMatrix> svd(best_u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  best_u = svd.matrixU() * svd.matrixV().adjoint();
  MetricReport r = make_report("lipschitz_distance", cfg, best_full.value, ReportKind::UpperBound);
  r.add_flag("info:dil=" + fmt_double(best_full.dil_ab) + "/" + fmt_double(best_full.dil_ba));
  if (floored) r.add_flag("log-floor");
  if (!converged) r.add_flag("nonconverged");
  return {r, UnitaryMap(best_u)};
}

}  // namespace detail

/// inf over inner automorphisms Ad_U of max{|ln dil(Ad_U)|, |ln dil(Ad_U^-1)|}.
inline LipschitzDistanceResult lipschitz_distance(const AlgebraSpec& algebra, const LipNormSpec& la,
                                                  const LipNormSpec& lb, const SolverConfig& cfg) {
  cfg.validate();
  require(algebra.single_block(), ErrorKind::Unsupported,
          "lipschitz_distance: only single-block algebras (all automorphisms inner) are supported");
  detail::require_lipnorm(algebra, la, "lipschitz_distance");
  detail::require_lipnorm(algebra, lb, "lipschitz_distance");
  // f(U; A, B) = f(U*; B, A): solve in a canonical order so the result is symmetric.
  if (detail::canonical_key(lb) < detail::canonical_key(la)) {
    auto res = detail::lipschitz_distance_ordered(algebra, lb, la, cfg);
    return {res.report, res.best_unitary.inverse()};
  }
  return detail::lipschitz_distance_ordered(algebra, la, lb, cfg);
}

/// Tolerance attached to each Lipschitz distance estimate.
inline double lipschitz_distance_tolerance(double value, const SolverConfig& cfg) {
  return 0.02 * std::abs(value) + 10.0 * cfg.tol;
}

/// |1 - exp(LipD)| (1/2 + max diameter): a propinquity bound from a Lipschitz distance.
inline double lipd_propinquity_bound(double lipd, double diam_a, double diam_b) {
  return std::abs(1.0 - std::exp(lipd)) * (0.5 + std::max(diam_a, diam_b));
}

/// Bound on the propinquity between curved deformations with coefficient
/// matrices H and H2 (m derivations): m max{||1 - H2 H^-1||, ||1 - H H2^-1||}
/// [1 + 1/2 max{(1 + m||1 - H^-1||)^-1, (1 + m||1 - H2^-1||)^-1} diam].
inline double curved_bound(const RMatrix& h, const RMatrix& h2, double diam) {
  require(h.rows() == h.cols() && h2.rows() == h.rows() && h2.cols() == h.cols(), ErrorKind::Shape,
          "curved_bound: coefficient matrices must be square and equal size");
  const auto m = static_cast<double>(h.rows());
  const RMatrix one = RMatrix::Identity(h.rows(), h.cols());
  const CMatrix hi = detail::inverse_checked(h.cast<cplx>(), "curved_bound");
  const CMatrix h2i = detail::inverse_checked(h2.cast<cplx>(), "curved_bound");
  const CMatrix hc = h.cast<cplx>(), h2c = h2.cast<cplx>(), onec = one.cast<cplx>();
  const double lead = m * std::max(operator_norm(CMatrix(onec - h2c * hi)), operator_norm(CMatrix(onec - hc * h2i)));
  const double inner = std::max(1.0 / (1.0 + m * operator_norm(CMatrix(onec - hi))),
                                1.0 / (1.0 + m * operator_norm(CMatrix(onec - h2i))));
  return lead * (1.0 + 0.5 * inner * diam);
}

}  // namespace qmetric
