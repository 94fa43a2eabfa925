#pragma once

// Lip-norm families built from Dirac-type operators, their evaluation as
// operator norms of linear matrix images, kernel certification and
// quasi-Leibniz defects.

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "qmetric/matrix_core.hpp"

namespace qmetric {

class LipNormSpec;

/// a -> ||[D, pi(a)]|| with pi(a) = a (x) I_m.
struct DiracCommutator {
  CMatrix dirac;
  int amplification = 1;
};

/// a -> ||[D + omega, pi(a)]||.
struct Perturbed {
  CMatrix dirac;
  CMatrix omega;
  int amplification = 1;
};

/// a -> ||D_h pi(a) - pi(h^2 a h^-2) D_h|| with D_h = pi(h) D pi(h).
struct Conformal {
  CMatrix dirac;
  CMatrix factor;
  int amplification = 1;
};

/// a -> || sum_j sum_k H[k][j] (i[X_k, a]) (x) gamma_j ||.
struct Curved {
  std::vector<CMatrix> generators;
  RMatrix coefficients;
};

/// a -> lambda * inner(a).
struct Scaled {
  double lambda = 1.0;
  std::shared_ptr<const LipNormSpec> inner;
};

class LipNormSpec {
 public:
  using Variant = std::variant<DiracCommutator, Perturbed, Conformal, Curved, Scaled>;

  LipNormSpec() = default;
  LipNormSpec(Variant v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  static LipNormSpec dirac(CMatrix d, int amplification = 1) {
    return LipNormSpec(DiracCommutator{std::move(d), amplification});
  }
  static LipNormSpec perturbed(CMatrix d, CMatrix omega, int amplification = 1) {
    return LipNormSpec(Perturbed{std::move(d), std::move(omega), amplification});
  }
  static LipNormSpec conformal(CMatrix d, CMatrix h, int amplification = 1) {
    return LipNormSpec(Conformal{std::move(d), std::move(h), amplification});
  }
  static LipNormSpec curved(std::vector<CMatrix> generators, RMatrix coefficients) {
    return LipNormSpec(Curved{std::move(generators), std::move(coefficients)});
  }
  static LipNormSpec scaled(double lambda, LipNormSpec inner) {
    return LipNormSpec(Scaled{lambda, std::make_shared<const LipNormSpec>(std::move(inner))});
  }

  const Variant& variant() const { return v_; }

  std::string variant_name() const {
    static const char* names[] = {"DiracCommutator", "Perturbed", "Conformal", "Curved", "Scaled"};
    return names[v_.index()];
  }

  /// Size of the matrices a the seminorm acts on.
  int algebra_dim() const {
    return std::visit(
        [](const auto& s) -> int {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Curved>) {
            return s.generators.empty() ? 0 : static_cast<int>(s.generators.front().rows());
          } else if constexpr (std::is_same_v<T, Scaled>) {
            return s.inner ? s.inner->algebra_dim() : 0;
          } else {
            return s.amplification > 0 ? static_cast<int>(s.dirac.rows()) / s.amplification : 0;
          }
        },
        v_);
  }

 private:
  Variant v_;
};

// ---------------------------------------------------------------------------
// Clifford generators

/// Hermitian gamma matrices with {g_i, g_j} = 2 delta_ij, of size 2^ceil(m/2):
/// the Jordan-Wigner family Z..Z X I..I, Z..Z Y I..I truncated to m elements.
inline std::vector<CMatrix> gamma_matrices(int m) {
  require(m >= 1, ErrorKind::InvalidInput, "gamma_matrices: need at least one generator");
  const int k = (m + 1) / 2;
  CMatrix x(2, 2), y(2, 2), z(2, 2), id = identity_matrix(2);
  x << 0, 1, 1, 0;
  y << 0, -kI, kI, 0;
  z << 1, 0, 0, -1;
  auto chain = [&](int j, const CMatrix& middle) {
    CMatrix out = identity_matrix(1);
    for (int i = 0; i < k; ++i) out = kron(out, i < j ? z : (i == j ? middle : id));
    return out;
  };
  std::vector<CMatrix> out;
  for (int j = 0; j < k && static_cast<int>(out.size()) < m; ++j) {
    out.push_back(chain(j, x));
    if (static_cast<int>(out.size()) < m) out.push_back(chain(j, y));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation and evaluation

namespace detail {

inline bool is_hermitian(const CMatrix& a, double tol = 1e-10) {
  return a.rows() == a.cols() && (a - a.adjoint()).norm() <= tol * std::max(1.0, a.norm());
}

inline CMatrix amplify(const CMatrix& a, int m) { return m == 1 ? a : kron(a, identity_matrix(m)); }

inline CMatrix inverse_checked(const CMatrix& h, const char* what) {
  Eigen::JacobiSVD<CMatrix> svd(h);
  const RVector& s = svd.singularValues();
  require(s.size() > 0 && s(s.size() - 1) > 1e-12 * std::max(1.0, s(0)), ErrorKind::SingularInput,
          std::string(what) + ": matrix is not invertible");
  return h.inverse();
}

inline void validate_rep(const CMatrix& d, int amplification, int n, const char* what) {
  require(amplification >= 1, ErrorKind::InvalidInput, std::string(what) + ": amplification must be >= 1");
  require(d.rows() == d.cols() && d.rows() == static_cast<Eigen::Index>(n) * amplification, ErrorKind::Shape,
          std::string(what) + ": Dirac operator size does not match the representation");
  require(all_finite(d), ErrorKind::InvalidInput, std::string(what) + ": non-finite Dirac operator");
  require(is_hermitian(d), ErrorKind::InvalidInput, std::string(what) + ": Dirac operator must be Hermitian");
}

}  // namespace detail

/// Checks that the spec is well formed for matrices of size n.
inline void validate_lipnorm(const LipNormSpec& spec, int n) {
  std::visit(
      [n](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiracCommutator>) {
          detail::validate_rep(s.dirac, s.amplification, n, "DiracCommutator");
        } else if constexpr (std::is_same_v<T, Perturbed>) {
          detail::validate_rep(s.dirac, s.amplification, n, "Perturbed");
          require(s.omega.rows() == s.dirac.rows() && s.omega.cols() == s.dirac.cols(), ErrorKind::Shape,
                  "Perturbed: omega size does not match D");
          require(detail::is_hermitian(s.omega), ErrorKind::InvalidInput, "Perturbed: omega must be Hermitian");
        } else if constexpr (std::is_same_v<T, Conformal>) {
          detail::validate_rep(s.dirac, s.amplification, n, "Conformal");
          require(s.factor.rows() == n && s.factor.cols() == n, ErrorKind::Shape, "Conformal: h size mismatch");
          require(detail::is_hermitian(s.factor), ErrorKind::InvalidInput, "Conformal: h must be Hermitian");
          (void)detail::inverse_checked(s.factor, "Conformal");
        } else if constexpr (std::is_same_v<T, Curved>) {
          const auto m = static_cast<Eigen::Index>(s.generators.size());
          require(m >= 1, ErrorKind::InvalidInput, "Curved: need at least one derivation generator");
          for (const auto& x : s.generators) {
            require(x.rows() == n && x.cols() == n, ErrorKind::Shape, "Curved: generator size mismatch");
            require(detail::is_hermitian(x), ErrorKind::InvalidInput, "Curved: generators must be Hermitian");
            require(std::abs(x.trace()) <= 1e-10 * std::max(1.0, x.norm()), ErrorKind::InvalidInput,
                    "Curved: generators must be traceless");
          }
          require(s.coefficients.rows() == m && s.coefficients.cols() == m, ErrorKind::Shape,
                  "Curved: coefficient matrix must be m x m");
          Eigen::JacobiSVD<RMatrix> svd(s.coefficients);
          const RVector& sv = svd.singularValues();
          require(sv(sv.size() - 1) > 1e-12 * std::max(1.0, sv(0)), ErrorKind::SingularInput,
                  "Curved: coefficient matrix is not invertible");
        } else {
          require(s.inner != nullptr, ErrorKind::InvalidInput, "Scaled: missing inner Lip-norm");
          require(s.lambda > 0.0 && std::isfinite(s.lambda), ErrorKind::InvalidInput, "Scaled: lambda must be > 0");
          validate_lipnorm(*s.inner, n);
        }
      },
      spec.variant());
}

/// The matrix whose operator norm is the seminorm of a. Complex-linear in a,
/// so it also extends the seminorm to non-self-adjoint elements.
inline CMatrix lip_image(const LipNormSpec& spec, const CMatrix& a) {
  return std::visit(
      [&a](const auto& s) -> CMatrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiracCommutator>) {
          require(a.rows() * s.amplification == s.dirac.rows(), ErrorKind::Shape, "lip_image: dimension mismatch");
          const CMatrix pa = detail::amplify(a, s.amplification);
          return s.dirac * pa - pa * s.dirac;
        } else if constexpr (std::is_same_v<T, Perturbed>) {
          require(a.rows() * s.amplification == s.dirac.rows(), ErrorKind::Shape, "lip_image: dimension mismatch");
          const CMatrix pa = detail::amplify(a, s.amplification);
          const CMatrix d = s.dirac + s.omega;
          return d * pa - pa * d;
        } else if constexpr (std::is_same_v<T, Conformal>) {
          require(a.rows() * s.amplification == s.dirac.rows(), ErrorKind::Shape, "lip_image: dimension mismatch");
          const CMatrix h2 = s.factor * s.factor;
          const CMatrix h2inv = detail::inverse_checked(h2, "Conformal");
          const CMatrix ph = detail::amplify(s.factor, s.amplification);
          const CMatrix dh = ph * s.dirac * ph;
          return dh * detail::amplify(a, s.amplification) - detail::amplify(h2 * a * h2inv, s.amplification) * dh;
        } else if constexpr (std::is_same_v<T, Curved>) {
          const auto m = static_cast<int>(s.generators.size());
          require(m >= 1 && a.rows() == s.generators.front().rows(), ErrorKind::Shape, "lip_image: dimension mismatch");
          const std::vector<CMatrix> gammas = gamma_matrices(m);
          std::vector<CMatrix> derivs;
          derivs.reserve(static_cast<std::size_t>(m));
          for (const auto& x : s.generators) derivs.push_back(kI * (x * a - a * x));
          const Eigen::Index g = gammas.front().rows();
          CMatrix out = CMatrix::Zero(a.rows() * g, a.cols() * g);
          for (int j = 0; j < m; ++j) {
            CMatrix mixed = CMatrix::Zero(a.rows(), a.cols());
            for (int k = 0; k < m; ++k) mixed += s.coefficients(k, j) * derivs[static_cast<std::size_t>(k)];
            out += kron(mixed, gammas[static_cast<std::size_t>(j)]);
          }
          return out;
        } else {
          return s.lambda * lip_image(*s.inner, a);
        }
      },
      spec.variant());
}

/// L(a). The central component a00 * 1 is removed first so that multiples of
/// the unit evaluate to exactly zero.
inline double eval_lipnorm(const LipNormSpec& spec, const HermitianMatrix& a) {
  require(a.dim() == spec.algebra_dim(), ErrorKind::Shape, "eval_lipnorm: dimension mismatch");
  const CMatrix shifted = a.matrix() - a.matrix()(0, 0).real() * identity_matrix(a.dim());
  return operator_norm(lip_image(spec, shifted));
}

/// Seminorm of a general (not necessarily self-adjoint) element.
inline double eval_lipnorm_general(const LipNormSpec& spec, const CMatrix& a) {
  require(a.rows() == spec.algebra_dim() && a.cols() == a.rows(), ErrorKind::Shape,
          "eval_lipnorm: dimension mismatch");
  return operator_norm(lip_image(spec, a - a(0, 0) * identity_matrix(static_cast<int>(a.rows()))));
}

/// ||a|| + L(a).
inline double domain_norm(const LipNormSpec& spec, const HermitianMatrix& a) {
  return operator_norm(a) + eval_lipnorm(spec, a);
}

/// Images of the traceless basis elements: L(sum_k y_k e_{k+1}) = ||sum_k y_k G_k||.
inline std::vector<CMatrix> lip_images(const LipNormSpec& spec, const HermitianBasis& basis) {
  require(basis.dim() == spec.algebra_dim(), ErrorKind::Shape, "lip_images: basis dimension mismatch");
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(basis.traceless_size()));
  for (int k = 1; k < basis.size(); ++k) out.push_back(lip_image(spec, basis.element(k)));
  return out;
}

// ---------------------------------------------------------------------------
// Admissible functions and quasi-Leibniz defects

class AdmissibleF {
 public:
  using Fn = std::function<double(double, double, double, double)>;

  /// F(x, y, lx, ly) = x ly + y lx.
  static AdmissibleF leibniz() { return AdmissibleF(Kind::Leibniz, 1.0, {}); }
  /// F_M(x, y, lx, ly) = M (x ly + y lx).
  static AdmissibleF scaled_leibniz(double m) {
    require(m >= 1.0, ErrorKind::InvalidInput, "AdmissibleF: scaled Leibniz constant must be >= 1");
    return AdmissibleF(Kind::ScaledLeibniz, m, {});
  }
  static AdmissibleF custom(Fn fn) { return AdmissibleF(Kind::Custom, 1.0, std::move(fn)); }

  double operator()(double x, double y, double lx, double ly) const {
    switch (kind_) {
      case Kind::Leibniz: return x * ly + y * lx;
      case Kind::ScaledLeibniz: return m_ * (x * ly + y * lx);
      case Kind::Custom: return fn_(x, y, lx, ly);
    }
    return 0.0;
  }

  /// Sampled admissibility: F >= x ly + y lx and monotone in each argument.
  bool check_admissible(std::uint64_t seed, int samples = 1000) const {
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
      double v[4];
      for (double& t : v) t = rng.uniform(0.0, 10.0);
      const double f = (*this)(v[0], v[1], v[2], v[3]);
      if (f < v[0] * v[3] + v[1] * v[2] - 1e-12 * std::max(1.0, std::abs(f))) return false;
      for (int k = 0; k < 4; ++k) {
        double w[4] = {v[0], v[1], v[2], v[3]};
        w[k] += rng.uniform(0.0, 2.0);
        if ((*this)(w[0], w[1], w[2], w[3]) < f - 1e-12 * std::max(1.0, std::abs(f))) return false;
      }
    }
    return true;
  }

 private:
  enum class Kind { Leibniz, ScaledLeibniz, Custom };
  AdmissibleF(Kind kind, double m, Fn fn) : kind_(kind), m_(m), fn_(std::move(fn)) {}

  Kind kind_;
  double m_;
  Fn fn_;
};

/// max{L(a o b), L({a, b})} - F(||a||, ||b||, L(a), L(b)); nonpositive when the
/// pair satisfies the F-quasi-Leibniz inequality.
inline double quasi_leibniz_defect(const LipNormSpec& spec, const AdmissibleF& f, const HermitianMatrix& a,
                                   const HermitianMatrix& b) {
  require(a.dim() == b.dim(), ErrorKind::Shape, "quasi_leibniz_defect: dimension mismatch");
  const double lhs = std::max(eval_lipnorm(spec, a.jordan(b)), eval_lipnorm(spec, a.lie(b)));
  return lhs - f(operator_norm(a), operator_norm(b), eval_lipnorm(spec, a), eval_lipnorm(spec, b));
}

// ---------------------------------------------------------------------------
// Kernel certification

struct KernelCheckResult {
  bool is_lipnorm = false;
  /// Smallest value of L found on the traceless unit sphere.
  double min_value = 0.0;
  /// Certified lower bound sigma_min / sqrt(rank) for that minimum.
  double lower_bound = 0.0;
  /// Minimizing traceless unit direction (a witness when the check fails).
  HermitianMatrix witness;
};

inline constexpr double kKernelThreshold = 1e-8;

namespace detail {

/// Real matrix of y -> vec(sum_k y_k G_k), stacking real then imaginary parts.
inline RMatrix realify(const std::vector<CMatrix>& images) {
  if (images.empty()) return RMatrix(0, 0);
  const Eigen::Index p = images.front().size();
  RMatrix out(2 * p, static_cast<Eigen::Index>(images.size()));
  for (std::size_t k = 0; k < images.size(); ++k) {
    const Eigen::Map<const Eigen::VectorXcd> v(images[k].data(), p);
    out.col(static_cast<Eigen::Index>(k)).head(p) = v.real();
    out.col(static_cast<Eigen::Index>(k)).tail(p) = v.imag();
  }
  return out;
}

inline CMatrix combine(const std::vector<CMatrix>& images, const RVector& y) {
  CMatrix out = CMatrix::Zero(images.front().rows(), images.front().cols());
  for (std::size_t k = 0; k < images.size(); ++k) out += y(static_cast<Eigen::Index>(k)) * images[k];
  return out;
}

inline RVector opnorm_subgradient(const std::vector<CMatrix>& images, const RVector& y) {
  const auto triples = top_singular_triples(combine(images, y), 1);
  RVector g(static_cast<Eigen::Index>(images.size()));
  for (std::size_t k = 0; k < images.size(); ++k)
    g(static_cast<Eigen::Index>(k)) = triples.front().u.dot(images[k] * triples.front().v).real();
  return g;
}

}  // namespace detail

/// Decides whether L vanishes exactly on the real multiples of the unit:
/// L(1) must be 0 and the minimum of L over the traceless unit sphere (found
/// by multistart projected subgradient descent) must exceed 1e-8.
inline KernelCheckResult kernel_check(const LipNormSpec& spec, const HermitianBasis& basis, int starts = 64,
                                      std::uint64_t seed = 0x6b65726eULL) {
  validate_lipnorm(spec, basis.dim());
  KernelCheckResult result;
  const int d = basis.traceless_size();
  const double unit_value = eval_lipnorm(spec, HermitianMatrix::identity(basis.dim()));
  if (d == 0) {
    result.is_lipnorm = unit_value == 0.0;
    result.min_value = std::numeric_limits<double>::infinity();
    result.lower_bound = result.min_value;
    result.witness = HermitianMatrix::zero(basis.dim());
    return result;
  }
  const std::vector<CMatrix> images = lip_images(spec, basis);
  const RMatrix real_map = detail::realify(images);
  Eigen::JacobiSVD<RMatrix> svd(real_map, Eigen::ComputeFullV);
  const RVector& sv = svd.singularValues();
  const double sigma_min = sv.size() == d ? sv(d - 1) : 0.0;
  const double rank_bound = static_cast<double>(std::min(images.front().rows(), images.front().cols()));
  result.lower_bound = sigma_min / std::sqrt(rank_bound);

  auto value_at = [&](const RVector& y) { return operator_norm(detail::combine(images, y)); };

  Rng rng(seed);
  RVector best = svd.matrixV().col(d - 1);
  double best_value = value_at(best);
  for (int s = 0; s < starts; ++s) {
    RVector y(d);
    if (s == 0) {
      y = svd.matrixV().col(d - 1);
    } else {
      for (int k = 0; k < d; ++k) y(k) = rng.normal();
      y.normalize();
    }
    double value = value_at(y);
    RVector run_best = y;
    double run_value = value;
    double step = 0.5 * value + 1e-3;
    for (int it = 0; it < 200 && value > 0.0; ++it) {
      RVector g = detail::opnorm_subgradient(images, y);
      g -= g.dot(y) * y;  // tangent component
      const double gn = g.norm();
      if (gn < 1e-14) break;
      RVector trial = y - (step / gn) * g;
      trial.normalize();
      const double tv = value_at(trial);
      if (tv < value) {
        y = trial;
        value = tv;
        if (value < run_value) {
          run_value = value;
          run_best = y;
        }
      } else {
        step *= 0.5;
        if (step < 1e-14) break;
      }
    }
    if (run_value < best_value) {
      best_value = run_value;
      best = run_best;
    }
  }
  result.min_value = best_value;
  result.witness = HermitianMatrix(basis.reconstruct_traceless(best));
  result.is_lipnorm = unit_value == 0.0 && best_value > kKernelThreshold;
  return result;
}

}  // namespace qmetric
