#pragma once

// Optimization over Lip-balls {a : L(a) <= r [, phi(a) = 0]}.
//
// All work happens in the coordinates y of the traceless part of a with
// respect to a HermitianBasis. Since L(a + t1) = L(a), the unsliced ball is
// the traceless ball plus the central line; a slice phi(a) = 0 picks the
// representative a = A(y) - phi(A(y)) 1. In both cases L(a) = ||sum_k y_k G_k||
// with G_k the images of the basis elements, so every ball is an
// operator-norm sublevel set in R^d and the separation oracle is the top
// singular pair of sum_k y_k G_k.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qmetric/lipnorms.hpp"
#include "qmetric/matrix_core.hpp"

namespace qmetric {

struct SolverConfig {
  double tol = 1e-6;
  int max_iter = 10000;
  int restarts = 32;
  std::uint64_t seed = 1;
  int oracle_resolution = 201;
  /// Direction-net size for Hausdorff estimates between Lip-balls.
  int hausdorff_directions = 128;
  /// Sampled pure states per side for bridge heights.
  int height_samples = 256;

  void validate() const {
    require(tol > 0.0 && std::isfinite(tol), ErrorKind::InvalidInput, "SolverConfig: tol must be > 0");
    require(max_iter >= 1, ErrorKind::InvalidInput, "SolverConfig: max_iter must be >= 1");
    require(restarts >= 1, ErrorKind::InvalidInput, "SolverConfig: restarts must be >= 1");
    require(oracle_resolution >= 51, ErrorKind::InvalidInput, "SolverConfig: oracle_resolution must be >= 51");
    require(hausdorff_directions >= 1, ErrorKind::InvalidInput, "SolverConfig: hausdorff_directions must be >= 1");
    require(height_samples >= 1, ErrorKind::InvalidInput, "SolverConfig: height_samples must be >= 1");
  }

  SolverConfig with_seed(std::uint64_t s) const {
    SolverConfig c = *this;
    c.seed = s;
    return c;
  }

  /// FNV-1a over the canonical text of all fields.
  std::string hash() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g|%d|%d|%llu|%d|%d|%d", tol, max_iter, restarts,
                  static_cast<unsigned long long>(seed), oracle_resolution, hausdorff_directions, height_samples);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = buf; *p; ++p) {
      h ^= static_cast<unsigned char>(*p);
      h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
  }
};

struct BallSpec {
  AlgebraSpec algebra;
  LipNormSpec lipnorm;
  double radius = 1.0;
  std::optional<DensityState> slice;
};

// ---------------------------------------------------------------------------
// Ball geometry

class LipBall {
 public:
  explicit LipBall(const BallSpec& spec) : spec_(spec), basis_(spec.algebra) {
    spec.algebra.validate();
    require(spec.radius > 0.0 && std::isfinite(spec.radius), ErrorKind::InvalidInput, "BallSpec: radius must be > 0");
    validate_lipnorm(spec.lipnorm, spec.algebra.total_dim());
    if (spec.slice) {
      require(spec.slice->dim() == spec.algebra.total_dim(), ErrorKind::Shape, "BallSpec: slice state dimension");
    }
    images_ = lip_images(spec.lipnorm, basis_);
    const int d = dim();
    terms_.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
      CMatrix e = basis_.element(k + 1);
      if (spec.slice) e -= state_eval_complex(*spec.slice, e).real() * identity_matrix(basis_.dim());
      terms_.push_back(e);
    }
    if (d > 0) {
      const RMatrix real_map = detail::realify(images_);
      Eigen::JacobiSVD<RMatrix> svd(real_map);
      const RVector& sv = svd.singularValues();
      const double smin = sv.size() == d ? sv(d - 1) : 0.0;
      const double rank = static_cast<double>(std::min(images_.front().rows(), images_.front().cols()));
      circumradius_ = smin > 1e-12 * std::max(1.0, sv(0)) ? std::sqrt(rank) * spec.radius / smin
                                                            : std::numeric_limits<double>::infinity();
      double gsum = 0.0;
      for (const auto& g : images_) gsum += std::pow(operator_norm(g), 2);
      inradius_ = gsum > 0.0 ? spec.radius / std::sqrt(gsum) : std::numeric_limits<double>::infinity();
    }
  }

  const BallSpec& spec() const { return spec_; }
  const HermitianBasis& basis() const { return basis_; }
  int dim() const { return basis_.traceless_size(); }
  int algebra_dim() const { return basis_.dim(); }
  double radius() const { return spec_.radius; }
  bool sliced() const { return spec_.slice.has_value(); }
  bool bounded() const { return std::isfinite(circumradius_); }

  /// Images G_k of the traceless basis elements under the Lip-norm's linear map.
  const std::vector<CMatrix>& images() const { return images_; }
  /// The matrices E_k with element(y) = sum_k y_k E_k.
  const std::vector<CMatrix>& element_terms() const { return terms_; }

  /// Rigorous bound on ||y||_2 over the ball.
  double circumradius() const { return circumradius_; }
  /// Radius of a Euclidean ball around 0 contained in the ball.
  double inradius() const { return inradius_; }

  double lip(const RVector& y) const { return y.size() == 0 ? 0.0 : operator_norm(detail::combine(images_, y)); }

  CMatrix element(const RVector& y) const {
    CMatrix a = CMatrix::Zero(algebra_dim(), algebra_dim());
    for (int k = 0; k < dim(); ++k) a += y(k) * terms_[static_cast<std::size_t>(k)];
    return a;
  }

  /// Coordinates of the representative of a (traceless part, or its slice).
  RVector coords(const HermitianMatrix& a) const { return basis_.traceless_coordinates(a); }

  /// Is a an element of the described set (up to relative tolerance)?
  bool contains(const HermitianMatrix& a, double tol = 1e-12) const {
    if (sliced() && std::abs(state_eval(*spec_.slice, a)) > tol * std::max(1.0, operator_norm(a))) return false;
    return lip(coords(a)) <= radius() * (1.0 + tol);
  }

 private:
  BallSpec spec_;
  HermitianBasis basis_;
  std::vector<CMatrix> images_;
  std::vector<CMatrix> terms_;
  double circumradius_ = 0.0;
  double inradius_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Cutting-plane machinery

enum class NormKind { Operator, MaxEigen, Spread };

inline double norm_kind_value(NormKind kind, const CMatrix& s) {
  switch (kind) {
    case NormKind::Operator: return operator_norm(s);
    case NormKind::MaxEigen: {
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(s, Eigen::EigenvaluesOnly);
      return eig.eigenvalues()(eig.eigenvalues().size() - 1);
    }
    case NormKind::Spread: {
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(s, Eigen::EigenvaluesOnly);
      return eig.eigenvalues()(eig.eigenvalues().size() - 1) - eig.eigenvalues()(0);
    }
  }
  return 0.0;
}

/// Linear functionals ell(S) = Re Tr(W* S) with ell <= kind(S) everywhere and
/// equality at the given S (subgradients, plus near-top singular pairs).
inline std::vector<CMatrix> norm_kind_supports(NormKind kind, const CMatrix& s, int max_extra = 2) {
  std::vector<CMatrix> out;
  if (kind == NormKind::Operator) {
    const auto triples = top_singular_triples(s, 1 + max_extra);
    if (triples.empty() || triples.front().sigma <= 0.0) return out;
    for (const auto& t : triples) {
      if (t.sigma < 0.9 * triples.front().sigma) break;
      out.push_back(t.u * t.v.adjoint());
    }
    return out;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(s);
  const Eigen::Index n = s.rows();
  const CVector top = eig.eigenvectors().col(n - 1);
  if (kind == NormKind::MaxEigen) {
    out.push_back(top * top.adjoint());
  } else {
    const CVector bottom = eig.eigenvectors().col(0);
    out.push_back(top * top.adjoint() - bottom * bottom.adjoint());
  }
  return out;
}

inline double frob_inner(const CMatrix& w, const CMatrix& s) { return (w.conjugate().cwiseProduct(s)).sum().real(); }

/// kind(offset + sum_i z_{var_i} M_i) <= rhs_const + sum_j rhs_coeff_j z_{rhs_var_j}.
struct NormConstraint {
  NormKind kind = NormKind::Operator;
  CMatrix offset;
  std::vector<std::pair<int, CMatrix>> terms;
  double rhs_const = 0.0;
  std::vector<std::pair<int, double>> rhs_terms;

  CMatrix eval(const RVector& z) const {
    CMatrix s = offset;
    for (const auto& [i, m] : terms) s += z(i) * m;
    return s;
  }
  double rhs(const RVector& z) const {
    double r = rhs_const;
    for (const auto& [i, c] : rhs_terms) r += c * z(i);
    return r;
  }
  double violation(const RVector& z) const { return norm_kind_value(kind, eval(z)) - rhs(z); }
};

struct CuttingPlaneProblem {
  RVector objective;  // maximize objective . z
  RVector lower;
  RVector upper;
  std::vector<NormConstraint> constraints;
};

struct CuttingPlaneResult {
  RVector z;           // best feasible point found
  double value = 0.0;  // objective at z
  double bound = 0.0;  // LP relaxation value: >= true optimum
  bool converged = false;
  int iterations = 0;
};

namespace detail {

/// Simplex on the dual of  max c.x  s.t.  a_j . x <= b_j:
///   min b.y  s.t.  sum_j y_j a_j = c,  y >= 0.
/// With n variables the basis is n x n and new primal rows (cuts) arrive as new
/// dual columns, so the current basis stays feasible across cut rounds.
class CutLp {
 public:
  explicit CutLp(const RVector& c, const RVector& lower, const RVector& upper) : c_(c), n_(static_cast<int>(c.size())) {
    for (int k = 0; k < n_; ++k) {
      RVector e = RVector::Zero(n_);
      e(k) = 1.0;
      add_row(e, upper(k));
      add_row(-e, -lower(k));
    }
    basis_.resize(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) basis_[static_cast<std::size_t>(k)] = c(k) >= 0.0 ? 2 * k : 2 * k + 1;
  }

  void add_row(const RVector& a, double b) {
    rows_.push_back(a);
    rhs_.push_back(b);
  }

  int row_count() const { return static_cast<int>(rows_.size()); }

  /// Returns false if the dual became unbounded (primal infeasible).
  bool solve(int max_pivots = 100000) {
    int degenerate = 0;
    for (int it = 0; it < max_pivots; ++it) {
      RMatrix bmat(n_, n_);
      RVector cost_b(n_);
      for (int k = 0; k < n_; ++k) {
        bmat.col(k) = rows_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(k)])];
        cost_b(k) = rhs_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(k)])];
      }
      Eigen::PartialPivLU<RMatrix> lu(bmat);
      y_ = lu.solve(c_);
      x_ = bmat.transpose().partialPivLu().solve(cost_b);
      const bool bland = degenerate > 30;
      int entering = -1;
      double best = -1e-11;
      for (int j = 0; j < row_count(); ++j) {
        const double r = rhs_[static_cast<std::size_t>(j)] - rows_[static_cast<std::size_t>(j)].dot(x_);
        if (r < best) {
          entering = j;
          if (bland) break;
          best = r;
        }
      }
      if (entering < 0) return true;
      const RVector delta = lu.solve(rows_[static_cast<std::size_t>(entering)]);
      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n_; ++k) {
        if (delta(k) > 1e-10) {
          const double t = std::max(0.0, y_(k)) / delta(k);
          if (t < ratio - 1e-14 ||
              (t <= ratio + 1e-14 && leave >= 0 && (bland ? basis_[static_cast<std::size_t>(k)] < basis_[static_cast<std::size_t>(leave)] : delta(k) > delta(leave)))) {
            ratio = t;
            leave = k;
          }
        }
      }
      if (leave < 0) return false;
      degenerate = ratio <= 1e-14 ? degenerate + 1 : 0;
      basis_[static_cast<std::size_t>(leave)] = entering;
    }
    return true;
  }

  const RVector& primal() const { return x_; }
  double value() const { return c_.dot(x_); }

 private:
  RVector c_;
  int n_;
  std::vector<RVector> rows_;
  std::vector<double> rhs_;
  std::vector<int> basis_;
  RVector y_;
  RVector x_;
};

}  // namespace detail

/// Kelley cutting planes for a convex program with norm-type constraints.
/// `repair` maps an LP point to a feasible point (or nothing); `start` must be
/// feasible. The box [lower, upper] must contain an optimal solution, which
/// makes the LP value a valid upper bound.
inline CuttingPlaneResult solve_cutting_plane(const CuttingPlaneProblem& problem,
                                              const std::function<std::optional<RVector>(const RVector&)>& repair,
                                              const RVector& start, double tol, int max_iter) {
  detail::CutLp lp(problem.objective, problem.lower, problem.upper);
  CuttingPlaneResult result;
  result.z = start;
  result.value = problem.objective.dot(start);
  result.bound = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(problem.objective.size());

  auto add_cuts_at = [&](const RVector& z) {
    int added = 0;
    for (const auto& con : problem.constraints) {
      const CMatrix s = con.eval(z);
      const double val = norm_kind_value(con.kind, s);
      const double rhs = con.rhs(z);
      if (val <= rhs + 1e-13 * std::max(1.0, std::abs(rhs))) continue;
      for (const CMatrix& w : norm_kind_supports(con.kind, s)) {
        RVector a = RVector::Zero(n);
        for (const auto& [i, m] : con.terms) a(i) += frob_inner(w, m);
        for (const auto& [i, c] : con.rhs_terms) a(i) -= c;
        double b = con.rhs_const - (con.offset.size() ? frob_inner(w, con.offset) : 0.0);
        const double nrm = a.norm();
        if (nrm < 1e-300) continue;
        lp.add_row(a / nrm, b / nrm);
        ++added;
      }
    }
    return added;
  };

  add_cuts_at(start);
  double last_bound = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int it = 0; it < max_iter; ++it) {
    result.iterations = it + 1;
    if (!lp.solve()) break;
    const RVector z = lp.primal();
    result.bound = std::min(result.bound, lp.value());
    if (auto fixed = repair(z)) {
      const double v = problem.objective.dot(*fixed);
      if (v > result.value) {
        result.value = v;
        result.z = *fixed;
      }
    }
    const double gap = result.bound - result.value;
    if (gap <= tol * std::max(1.0, std::abs(result.value))) {
      result.converged = true;
      break;
    }
    if (add_cuts_at(z) == 0) {
      // The LP point satisfies every constraint, so it is optimal.
      result.z = z;
      result.value = lp.value();
      result.bound = result.value;
      result.converged = true;
      break;
    }
    stall = result.bound < last_bound - 1e-15 * std::max(1.0, std::abs(last_bound)) ? 0 : stall + 1;
    last_bound = result.bound;
    if (stall > 200) break;
  }
  result.bound = std::max(result.bound, result.value);
  return result;
}

// ---------------------------------------------------------------------------
// Linear maximization

struct LinearMaxResult {
  double value = 0.0;
  double certificate = 0.0;
  HermitianMatrix argmax;
  RVector coords;
  bool converged = true;
  int iterations = 0;
};

namespace detail {

/// max w.y over {||sum y_k G_k|| <= r} in coordinates.
inline LinearMaxResult max_linear_coords(const LipBall& ball, const RVector& w, double tol, int max_iter) {
  LinearMaxResult out;
  const int d = ball.dim();
  out.coords = RVector::Zero(d);
  if (d == 0 || w.norm() <= 1e-300) {
    out.argmax = HermitianMatrix(ball.element(out.coords));
    return out;
  }
  require(ball.bounded(), ErrorKind::UnboundedProblem, "max_linear_over_ball: the ball is unbounded (kernel larger than R1)");
  const double box = ball.circumradius() * (1.0 + 1e-9);
  CuttingPlaneProblem prob;
  prob.objective = w;
  prob.lower = RVector::Constant(d, -box);
  prob.upper = RVector::Constant(d, box);
  NormConstraint con;
  con.kind = NormKind::Operator;
  con.offset = CMatrix::Zero(ball.images().front().rows(), ball.images().front().cols());
  for (int k = 0; k < d; ++k) con.terms.emplace_back(k, ball.images()[static_cast<std::size_t>(k)]);
  con.rhs_const = ball.radius();
  prob.constraints.push_back(std::move(con));
  const double r = ball.radius();
  auto repair = [&](const RVector& y) -> std::optional<RVector> {
    const double l = ball.lip(y);
    if (l <= r) return y;
    return RVector(y * (r / l));
  };
  // A boundary start along w gives the first supporting cut.
  RVector start = w;
  const double lw = ball.lip(start);
  start *= lw > 0.0 ? r / lw : 0.0;
  const CuttingPlaneResult cp = solve_cutting_plane(prob, repair, start, tol, max_iter);
  out.value = cp.value;
  out.certificate = cp.bound;
  out.coords = cp.z;
  out.converged = cp.converged;
  out.iterations = cp.iterations;
  out.argmax = HermitianMatrix(ball.element(cp.z));
  return out;
}

inline RVector linear_coefficients(const LipBall& ball, const CMatrix& c) {
  RVector w(ball.dim());
  for (int k = 0; k < ball.dim(); ++k)
    w(k) = (c.cwiseProduct(ball.element_terms()[static_cast<std::size_t>(k)].transpose())).sum().real();
  return w;
}

}  // namespace detail

/// max Tr(c a) over the ball, with a dual certificate from the cutting-plane
/// relaxation. On unsliced balls c must be traceless.
inline LinearMaxResult max_linear_over_ball(const HermitianMatrix& c, const BallSpec& spec, const SolverConfig& cfg) {
  cfg.validate();
  const LipBall ball(spec);
  require(c.dim() == ball.algebra_dim(), ErrorKind::Shape, "max_linear_over_ball: dimension mismatch");
  if (!spec.slice) {
    require(std::abs(c.matrix().trace().real()) <= 1e-12 * std::max(1.0, operator_norm(c)),
            ErrorKind::UnboundedProblem, "max_linear_over_ball: c has a trace component on an unsliced ball");
  }
  return detail::max_linear_coords(ball, detail::linear_coefficients(ball, c.matrix()), cfg.tol, cfg.max_iter);
}

// ---------------------------------------------------------------------------
// Distance to a ball

struct DistanceResult {
  double dist = 0.0;         // attained by `projection`
  double lower_bound = 0.0;  // certified
  HermitianMatrix projection;
  RVector coords;
  bool converged = true;
  int iterations = 0;
};

namespace detail {

struct GeneralDistanceResult {
  double dist = 0.0;
  double lower_bound = 0.0;
  RVector coords;
  RVector free_coeffs;
  bool converged = true;
  int iterations = 0;
};

/// min ||target - sum_k y_k terms_k - sum_f t_f free_f|| over {L(y) <= r}, t free.
inline GeneralDistanceResult min_distance_general(const LipBall& ball, const CMatrix& target,
                                                  const std::vector<CMatrix>& terms,
                                                  const std::vector<CMatrix>& free_terms, double tol, int max_iter) {
  GeneralDistanceResult out;
  const int d = ball.dim();
  const int f = static_cast<int>(free_terms.size());
  const int n = d + f + 1;
  const int s_var = d + f;
  require(d == 0 || ball.bounded(), ErrorKind::UnboundedProblem, "min_distance: the ball is unbounded");
  const double target_norm = operator_norm(target);
  double term_mass = 0.0;
  for (const auto& t : terms) term_mass += std::pow(operator_norm(t), 2);
  const double reach = d > 0 ? ball.circumradius() * std::sqrt(term_mass) : 0.0;

  CuttingPlaneProblem prob;
  prob.objective = RVector::Zero(n);
  prob.objective(s_var) = -1.0;
  prob.lower = RVector::Zero(n);
  prob.upper = RVector::Zero(n);
  const double box = d > 0 ? ball.circumradius() * (1.0 + 1e-9) : 0.0;
  for (int k = 0; k < d; ++k) {
    prob.lower(k) = -box;
    prob.upper(k) = box;
  }
  for (int k = 0; k < f; ++k) {
    const double fn = operator_norm(free_terms[static_cast<std::size_t>(k)]);
    const double tb = fn > 0.0 ? 2.0 * (target_norm + reach) / fn + 1.0 : 1.0;
    prob.lower(d + k) = -tb;
    prob.upper(d + k) = tb;
  }
  prob.lower(s_var) = 0.0;
  prob.upper(s_var) = target_norm + reach + 1.0;

  NormConstraint dist_con;
  dist_con.kind = NormKind::Operator;
  dist_con.offset = target;
  for (int k = 0; k < d; ++k) dist_con.terms.emplace_back(k, -terms[static_cast<std::size_t>(k)]);
  for (int k = 0; k < f; ++k) dist_con.terms.emplace_back(d + k, -free_terms[static_cast<std::size_t>(k)]);
  dist_con.rhs_terms.emplace_back(s_var, 1.0);
  prob.constraints.push_back(dist_con);
  if (d > 0) {
    NormConstraint ball_con;
    ball_con.kind = NormKind::Operator;
    ball_con.offset = CMatrix::Zero(ball.images().front().rows(), ball.images().front().cols());
    for (int k = 0; k < d; ++k) ball_con.terms.emplace_back(k, ball.images()[static_cast<std::size_t>(k)]);
    ball_con.rhs_const = ball.radius();
    prob.constraints.push_back(std::move(ball_con));
  }
  const double r = ball.radius();
  auto repair = [&](const RVector& z) -> std::optional<RVector> {
    RVector fixed = z;
    if (d > 0) {
      const double l = ball.lip(z.head(d));
      if (l > r) fixed.head(d) *= r / l;
    }
    fixed(s_var) = 0.0;
    fixed(s_var) = operator_norm(dist_con.eval(fixed));
    return fixed;
  };
  RVector start = RVector::Zero(n);
  start(s_var) = target_norm;
  const CuttingPlaneResult cp = solve_cutting_plane(prob, repair, start, tol, max_iter);
  out.dist = -cp.value;
  out.lower_bound = std::max(0.0, -cp.bound);
  out.coords = cp.z.head(d);
  out.free_coeffs = cp.z.segment(d, f);
  out.converged = cp.converged;
  out.iterations = cp.iterations;
  return out;
}

}  // namespace detail

/// min ||a - b|| over b in the ball. For an unsliced ball the central line is
/// part of the set, so the minimization also runs over b + t1.
inline DistanceResult min_distance_to_ball(const HermitianMatrix& a, const BallSpec& spec, const SolverConfig& cfg) {
  cfg.validate();
  const LipBall ball(spec);
  require(a.dim() == ball.algebra_dim(), ErrorKind::Shape, "min_distance_to_ball: dimension mismatch");
  DistanceResult out;
  if (ball.contains(a)) {
    out.projection = a;
    out.coords = ball.coords(a);
    return out;
  }
  std::vector<CMatrix> free_terms;
  if (!spec.slice) free_terms.push_back(identity_matrix(ball.algebra_dim()));
  const auto res = detail::min_distance_general(ball, a.matrix(), ball.element_terms(), free_terms, cfg.tol, cfg.max_iter);
  out.dist = res.dist;
  out.lower_bound = res.lower_bound;
  out.coords = res.coords;
  CMatrix proj = ball.element(res.coords);
  if (!spec.slice) proj += res.free_coeffs(0) * identity_matrix(ball.algebra_dim());
  out.projection = HermitianMatrix(proj);
  out.converged = res.converged;
  out.iterations = res.iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Convex maximization (heuristic, multistart)

/// A convex functional on self-adjoint elements. The structured kinds expose a
/// linear map T so the engine can precompute T(E_k) and use exact subgradients;
/// Custom falls back to central differences.
class ConvexFunctional {
 public:
  enum class Kind { OperatorNorm, Spread, Linear, Custom };
  using LinearMap = std::function<CMatrix(const CMatrix&)>;

  /// a -> ||T(a)||.
  static ConvexFunctional operator_norm_of(LinearMap map) {
    ConvexFunctional g(Kind::OperatorNorm);
    g.map_ = std::move(map);
    return g;
  }
  /// a -> ||a||.
  static ConvexFunctional operator_norm() {
    return operator_norm_of([](const CMatrix& a) { return a; });
  }
  /// a -> lambda_max(T(a)) - lambda_min(T(a)) for Hermitian-valued T.
  static ConvexFunctional spread_of(LinearMap map) {
    ConvexFunctional g(Kind::Spread);
    g.map_ = std::move(map);
    return g;
  }
  static ConvexFunctional spread() {
    return spread_of([](const CMatrix& a) { return a; });
  }
  /// a -> Tr(c a).
  static ConvexFunctional linear(const HermitianMatrix& c) {
    ConvexFunctional g(Kind::Linear);
    g.c_ = c.matrix();
    return g;
  }
  static ConvexFunctional custom(std::function<double(const HermitianMatrix&)> fn) {
    ConvexFunctional g(Kind::Custom);
    g.custom_ = std::move(fn);
    return g;
  }

  Kind kind() const { return kind_; }
  const LinearMap& map() const { return map_; }
  const CMatrix& linear_coefficient() const { return c_; }

  double operator()(const HermitianMatrix& a) const {
    switch (kind_) {
      case Kind::OperatorNorm: return qmetric::operator_norm(map_(a.matrix()));
      case Kind::Spread: return norm_kind_value(NormKind::Spread, map_(a.matrix()));
      case Kind::Linear: return (c_.cwiseProduct(a.matrix().transpose())).sum().real();
      case Kind::Custom: return custom_(a);
    }
    return 0.0;
  }

 private:
  explicit ConvexFunctional(Kind kind) : kind_(kind) {}
  Kind kind_;
  LinearMap map_;
  CMatrix c_;
  std::function<double(const HermitianMatrix&)> custom_;
};

struct ConvexMaxResult {
  double value = 0.0;  // lower estimate of the supremum
  HermitianMatrix argmax;
  RVector coords;
  bool converged = true;
  int starts = 0;
};

namespace detail {

/// The functional pulled back to ball coordinates.
class CoordFunctional {
 public:
  CoordFunctional(const ConvexFunctional& g, const LipBall& ball) : g_(g), ball_(ball) {
    switch (g.kind()) {
      case ConvexFunctional::Kind::OperatorNorm:
      case ConvexFunctional::Kind::Spread:
        for (const auto& e : ball.element_terms()) images_.push_back(g.map()(e));
        break;
      case ConvexFunctional::Kind::Linear: w_ = linear_coefficients(ball, g.linear_coefficient()); break;
      case ConvexFunctional::Kind::Custom: break;
    }
  }

  double value(const RVector& y) const {
    switch (g_.kind()) {
      case ConvexFunctional::Kind::OperatorNorm:
        return images_.empty() ? 0.0 : operator_norm(combine(images_, y));
      case ConvexFunctional::Kind::Spread:
        return images_.empty() ? 0.0 : norm_kind_value(NormKind::Spread, combine(images_, y));
      case ConvexFunctional::Kind::Linear: return w_.dot(y);
      case ConvexFunctional::Kind::Custom: return g_(HermitianMatrix(ball_.element(y)));
    }
    return 0.0;
  }

  RVector subgradient(const RVector& y) const {
    const int d = static_cast<int>(y.size());
    RVector out = RVector::Zero(d);
    switch (g_.kind()) {
      case ConvexFunctional::Kind::OperatorNorm:
      case ConvexFunctional::Kind::Spread: {
        if (images_.empty()) return out;
        const NormKind nk =
            g_.kind() == ConvexFunctional::Kind::OperatorNorm ? NormKind::Operator : NormKind::Spread;
        const auto supports = norm_kind_supports(nk, combine(images_, y), 0);
        if (supports.empty()) return out;
        for (int k = 0; k < d; ++k) out(k) = frob_inner(supports.front(), images_[static_cast<std::size_t>(k)]);
        return out;
      }
      case ConvexFunctional::Kind::Linear: return w_;
      case ConvexFunctional::Kind::Custom: {
        const double h = 1e-6 * std::max(1.0, y.norm());
        for (int k = 0; k < d; ++k) {
          RVector p = y, m = y;
          p(k) += h;
          m(k) -= h;
          out(k) = (value(p) - value(m)) / (2.0 * h);
        }
        return out;
      }
    }
    return out;
  }

  /// Lipschitz constant w.r.t. ||y||_2 for the structured kinds.
  double lipschitz() const {
    switch (g_.kind()) {
      case ConvexFunctional::Kind::OperatorNorm:
      case ConvexFunctional::Kind::Spread: {
        double s = 0.0;
        for (const auto& m : images_) s += std::pow(operator_norm(m), 2);
        return (g_.kind() == ConvexFunctional::Kind::Spread ? 2.0 : 1.0) * std::sqrt(s);
      }
      case ConvexFunctional::Kind::Linear: return w_.norm();
      case ConvexFunctional::Kind::Custom: return std::numeric_limits<double>::quiet_NaN();
    }
    return 0.0;
  }

 private:
  const ConvexFunctional& g_;
  const LipBall& ball_;
  std::vector<CMatrix> images_;
  RVector w_;
};

inline bool lex_less(const RVector& a, const RVector& b) {
  for (Eigen::Index k = 0; k < a.size() && k < b.size(); ++k) {
    if (a(k) < b(k)) return true;
    if (a(k) > b(k)) return false;
  }
  return false;
}

/// Multistart ascent for a convex functional: each step jumps to the
/// maximizer over the ball of the current linearization (the infinite-step
/// limit of projected gradient ascent), which never decreases a convex g.
inline ConvexMaxResult max_convex_coords(const CoordFunctional& g, const LipBall& ball, const SolverConfig& cfg,
                                         const std::vector<RVector>& warm_starts = {},
                                         std::vector<RVector>* endpoints = nullptr) {
  ConvexMaxResult out;
  const int d = ball.dim();
  out.coords = RVector::Zero(d);
  out.value = g.value(out.coords);
  if (d == 0) {
    out.argmax = HermitianMatrix(ball.element(out.coords));
    return out;
  }
  require(ball.bounded(), ErrorKind::UnboundedProblem, "max_convex_over_ball: the ball is unbounded");
  const double r = ball.radius();
  const double inner_tol = std::max(cfg.tol, 1e-7);
  Rng rng(sub_seed(cfg.seed, 0x636f6e76ULL));
  bool have = false;
  const int total = static_cast<int>(warm_starts.size()) + cfg.restarts;
  for (int s = 0; s < total; ++s) {
    RVector y(d);
    if (s < static_cast<int>(warm_starts.size())) {
      y = warm_starts[static_cast<std::size_t>(s)];
    } else {
      for (int k = 0; k < d; ++k) y(k) = rng.normal();
    }
    const double l0 = ball.lip(y);
    if (!(l0 > 0.0)) continue;
    y *= r / l0;
    double value = g.value(y);
    bool run_converged = true;
    for (int it = 0; it < 100; ++it) {
      const RVector grad = g.subgradient(y);
      if (grad.norm() <= 1e-300) break;
      const LinearMaxResult step = max_linear_coords(ball, grad, inner_tol, cfg.max_iter);
      run_converged = run_converged && step.converged;
      const double nv = g.value(step.coords);
      if (nv <= value * (1.0 + 1e-12) + 1e-300) break;
      const double gain = nv - value;
      y = step.coords;
      value = nv;
      if (gain <= cfg.tol * 1e-2 * std::max(1.0, std::abs(value))) break;
    }
    // Report a point on the boundary sphere L = r.
    const double l = ball.lip(y);
    if (l > 0.0 && std::abs(l - r) > 1e-12 * r) {
      const RVector scaled = y * (r / l);
      const double sv = g.value(scaled);
      if (sv >= value || l > r) {
        y = scaled;
        value = sv;
      }
    }
    ++out.starts;
    if (endpoints) endpoints->push_back(y);
    const double scale = std::max(1.0, std::abs(value));
    if (!have || value > out.value + 1e-12 * scale ||
        (std::abs(value - out.value) <= 1e-12 * scale && lex_less(y, out.coords))) {
      out.value = value;
      out.coords = y;
      out.converged = run_converged;
      have = true;
    }
  }
  if (!have) {
    out.coords = RVector::Zero(d);
    out.value = g.value(out.coords);
  }
  out.argmax = HermitianMatrix(ball.element(out.coords));
  return out;
}

}  // namespace detail

/// Lower estimate of sup g over the ball (best of cfg.restarts ascent runs).
inline ConvexMaxResult max_convex_over_ball(const ConvexFunctional& g, const BallSpec& spec, const SolverConfig& cfg,
                                            const std::vector<RVector>& warm_starts = {}) {
  cfg.validate();
  const LipBall ball(spec);
  const detail::CoordFunctional cg(g, ball);
  return detail::max_convex_coords(cg, ball, cfg, warm_starts);
}

// ---------------------------------------------------------------------------
// Brute-force grid oracle for traceless dimension <= 3

enum class OracleProblem { MaxLinear, MinDistance, MaxConvex };

struct OraclePayload {
  HermitianMatrix c;                     // MaxLinear
  HermitianMatrix target;                // MinDistance
  std::optional<ConvexFunctional> g;     // MaxConvex
};

struct OracleResult {
  double value = 0.0;
  /// Analytic bound on |value - true optimum| from the coarse grid.
  double error_bound = 0.0;
  RVector coords;
  long long evaluations = 0;
};

/// Exhaustive evaluation over a regular grid of [-R, R]^d (R a rigorous
/// circumscribed radius), refined once on a 21-point grid around the best cell.
/// The error bound is Lip * (h sqrt(d) / 2) * (1 + R / rho) where h is the
/// coarse spacing and rho the inscribed radius: every point of the ball lies
/// that close to a feasible grid point.
inline OracleResult brute_force_oracle(OracleProblem problem, const BallSpec& spec, const OraclePayload& payload,
                                       int resolution) {
  require(resolution >= 51, ErrorKind::InvalidInput, "brute_force_oracle: resolution must be >= 51");
  const LipBall ball(spec);
  const int d = ball.dim();
  require(d <= 3, ErrorKind::UnsupportedDimension,
          "brute_force_oracle: traceless dimension " + std::to_string(d) + " exceeds 3");
  require(d == 0 || ball.bounded(), ErrorKind::UnboundedProblem, "brute_force_oracle: the ball is unbounded");
  const double r = ball.radius();
  const bool maximize = problem != OracleProblem::MinDistance;

  std::function<double(const RVector&)> objective;
  double lipschitz = 0.0;
  switch (problem) {
    case OracleProblem::MaxLinear: {
      require(payload.c.dim() == ball.algebra_dim(), ErrorKind::Shape, "brute_force_oracle: payload dimension");
      if (!spec.slice)
        require(std::abs(payload.c.matrix().trace().real()) <= 1e-12 * std::max(1.0, operator_norm(payload.c)),
                ErrorKind::UnboundedProblem, "brute_force_oracle: c has a trace component on an unsliced ball");
      const RVector w = detail::linear_coefficients(ball, payload.c.matrix());
      objective = [w](const RVector& y) { return w.dot(y); };
      lipschitz = w.norm();
      break;
    }
    case OracleProblem::MinDistance: {
      require(payload.target.dim() == ball.algebra_dim(), ErrorKind::Shape, "brute_force_oracle: payload dimension");
      const CMatrix a = payload.target.matrix();
      const bool sliced = ball.sliced();
      objective = [&ball, a, sliced](const RVector& y) {
        const CMatrix diff = a - ball.element(y);
        // Unsliced: min over t of ||H - t1|| = spread(H)/2 for Hermitian H.
        return sliced ? operator_norm(diff) : 0.5 * norm_kind_value(NormKind::Spread, diff);
      };
      double s = 0.0;
      for (const auto& e : ball.element_terms()) s += std::pow(operator_norm(e), 2);
      lipschitz = std::sqrt(s);
      break;
    }
    case OracleProblem::MaxConvex: {
      require(payload.g.has_value(), ErrorKind::InvalidInput, "brute_force_oracle: missing functional");
      const ConvexFunctional g = *payload.g;
      objective = [&ball, g](const RVector& y) { return g(HermitianMatrix(ball.element(y))); };
      lipschitz = detail::CoordFunctional(g, ball).lipschitz();
      break;
    }
  }

  OracleResult out;
  if (d == 0) {
    out.coords = RVector::Zero(0);
    out.value = objective(out.coords);
    out.evaluations = 1;
    return out;
  }
  const double big = ball.circumradius();
  // Membership pre-filter: ||S||_F / sqrt(p) <= ||S|| <= ||S||_F, and ||S||_F^2 is
  // the quadratic form y' Q y. Only points in the annulus need the exact norm.
  RMatrix gram(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      gram(j, k) = (ball.images()[static_cast<std::size_t>(j)].conjugate().cwiseProduct(
                        ball.images()[static_cast<std::size_t>(k)]))
                       .sum()
                       .real();
  const double rank = static_cast<double>(std::min(ball.images().front().rows(), ball.images().front().cols()));
  auto member = [&](const RVector& y) {
    const double f2 = y.dot(gram * y);
    if (f2 <= r * r * (1.0 - 1e-12)) return true;
    if (f2 > rank * r * r * (1.0 + 1e-12)) return false;
    return ball.lip(y) <= r;
  };
  auto sweep = [&](const RVector& center, double half_width, int points, bool& found, double& best, RVector& best_y) {
    const double h = 2.0 * half_width / (points - 1);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    RVector y(d);
    while (true) {
      for (int k = 0; k < d; ++k) y(k) = center(k) - half_width + h * idx[static_cast<std::size_t>(k)];
      ++out.evaluations;
      const double v = objective(y);
      if ((!found || (maximize ? v > best : v < best)) && member(y)) {
        best = v;
        best_y = y;
        found = true;
      }
      int k = 0;
      while (k < d && ++idx[static_cast<std::size_t>(k)] == points) idx[static_cast<std::size_t>(k++)] = 0;
      if (k == d) break;
    }
  };
  bool found = false;
  double best = 0.0;
  RVector best_y = RVector::Zero(d);
  sweep(RVector::Zero(d), big, resolution, found, best, best_y);
  const double h = 2.0 * big / (resolution - 1);
  if (found) sweep(best_y, h, 21, found, best, best_y);
  if (!found) {
    best_y = RVector::Zero(d);
    best = objective(best_y);
  }
  out.value = best;
  out.coords = best_y;
  out.error_bound = lipschitz * (h * std::sqrt(static_cast<double>(d)) / 2.0) * (1.0 + big / ball.inradius());
  return out;
}

}  // namespace qmetric
