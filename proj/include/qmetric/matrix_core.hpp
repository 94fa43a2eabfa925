#pragma once

// Dense complex Hermitian linear algebra on finite-dimensional C*-algebras
// (direct sums of full matrix algebras), states, inner automorphisms and
// orthonormal Hermitian bases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "qmetric/errors.hpp"
#include "qmetric/rng.hpp"

namespace qmetric {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};

inline bool all_finite(const CMatrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
  return true;
}

inline CMatrix identity_matrix(int n) { return CMatrix::Identity(n, n); }

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// One singular triple (sigma, left vector u, right vector v) with A v = sigma u.
struct SingularTriple {
  double sigma = 0.0;
  CVector u;
  CVector v;
};

/// Leading singular triples in decreasing order, computed from the Hermitian
/// eigenproblem of A*A. Only the top of the spectrum is needed by callers, where
/// this route is accurate to machine precision relative to sigma_max.
inline std::vector<SingularTriple> top_singular_triples(const CMatrix& a, int count) {
  const Eigen::Index q = a.cols();
  std::vector<SingularTriple> out;
  if (q == 0 || a.rows() == 0) return out;
  const CMatrix gram = a.adjoint() * a;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram);
  const RVector& lambda = eig.eigenvalues();
  for (int k = 0; k < count && k < q; ++k) {
    const Eigen::Index idx = q - 1 - k;
    SingularTriple t;
    t.sigma = std::sqrt(std::max(0.0, lambda(idx)));
    t.v = eig.eigenvectors().col(idx);
    if (t.sigma > 0.0) {
      t.u = a * t.v / t.sigma;
      const double nu = t.u.norm();
      if (nu > 0.0) t.u /= nu;
    } else {
      t.u = CVector::Zero(a.rows());
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Largest singular value (operator norm for the l2 Hilbert-space norm).
inline double operator_norm(const CMatrix& a) {
  require(all_finite(a), ErrorKind::InvalidInput, "operator_norm: non-finite entries");
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 || a.cols() == 1) return a.norm();
  if (a.rows() == 2 && a.cols() == 2) {
    // sigma_max^2 = (F + sqrt(F^2 - 4|det|^2)) / 2 with F the squared Frobenius norm.
    const double f = a.squaredNorm();
    const double det = std::abs(a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0));
    const double disc = std::max(0.0, f * f - 4.0 * det * det);
    return std::sqrt(0.5 * (f + std::sqrt(disc)));
  }
  const CMatrix gram = a.rows() < a.cols() ? CMatrix(a * a.adjoint()) : CMatrix(a.adjoint() * a);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues()(eig.eigenvalues().size() - 1)));
}

// ---------------------------------------------------------------------------
// HermitianMatrix

class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  /// Symmetrizes (A + A*)/2; rejects non-square or non-finite input.
  explicit HermitianMatrix(const CMatrix& a) {
    require(a.rows() == a.cols(), ErrorKind::Shape, "HermitianMatrix: matrix is not square");
    require(a.rows() >= 1, ErrorKind::InvalidInput, "HermitianMatrix: dim must be >= 1");
    require(all_finite(a), ErrorKind::InvalidInput, "HermitianMatrix: non-finite entries");
    m_ = 0.5 * (a + a.adjoint());
  }

  static HermitianMatrix zero(int n) { return HermitianMatrix(CMatrix::Zero(n, n)); }
  static HermitianMatrix identity(int n) { return HermitianMatrix(identity_matrix(n)); }
  static HermitianMatrix diagonal(const std::vector<double>& d) {
    CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = d[i];
    return HermitianMatrix(m);
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }

  HermitianMatrix operator+(const HermitianMatrix& o) const { return HermitianMatrix(m_ + o.m_); }
  HermitianMatrix operator-(const HermitianMatrix& o) const { return HermitianMatrix(m_ - o.m_); }
  HermitianMatrix operator*(double t) const { return HermitianMatrix(m_ * t); }
  HermitianMatrix operator-() const { return HermitianMatrix(-m_); }

  /// Jordan product (ab + ba)/2.
  HermitianMatrix jordan(const HermitianMatrix& b) const {
    return HermitianMatrix(0.5 * (m_ * b.m_ + b.m_ * m_));
  }
  /// Lie product (ab - ba)/(2i).
  HermitianMatrix lie(const HermitianMatrix& b) const {
    return HermitianMatrix((m_ * b.m_ - b.m_ * m_) / (2.0 * kI));
  }

 private:
  CMatrix m_;
};

inline HermitianMatrix operator*(double t, const HermitianMatrix& a) { return a * t; }

inline double operator_norm(const HermitianMatrix& a) { return operator_norm(a.matrix()); }

inline RVector eigenvalues(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(a.matrix(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

/// lambda_max - lambda_min; equals the largest gap |phi(a) - psi(a)| over pairs of states.
inline double spectral_spread(const HermitianMatrix& a) {
  const RVector ev = eigenvalues(a);
  return std::max(0.0, ev(ev.size() - 1) - ev(0));
}

/// a - t*1 with t the midpoint of the spectrum; the norm-minimizing central shift.
inline HermitianMatrix central_normalize(const HermitianMatrix& a) {
  const RVector ev = eigenvalues(a);
  const double t = 0.5 * (ev(ev.size() - 1) + ev(0));
  return HermitianMatrix(a.matrix() - t * identity_matrix(a.dim()));
}

// ---------------------------------------------------------------------------
// DensityState

class DensityState {
 public:
  DensityState() = default;

  explicit DensityState(const CMatrix& rho) : rho_(rho) {
    const RVector ev = eigenvalues(rho_);
    require(ev(0) >= -1e-10, ErrorKind::InvalidInput, "DensityState: matrix is not positive semidefinite");
    require(std::abs(rho_.matrix().trace().real() - 1.0) <= 1e-10, ErrorKind::InvalidInput,
            "DensityState: trace is not 1");
  }

  static DensityState pure(const CVector& psi) {
    require(psi.size() >= 1, ErrorKind::InvalidInput, "DensityState::pure: empty vector");
    const double nrm = psi.norm();
    require(nrm > 0.0 && std::isfinite(nrm), ErrorKind::InvalidInput, "DensityState::pure: zero vector");
    const CVector unit = psi / nrm;
    return DensityState(unit * unit.adjoint());
  }
  static DensityState basis_state(int dim, int k) {
    require(k >= 0 && k < dim, ErrorKind::InvalidInput, "DensityState::basis_state: index out of range");
    CVector e = CVector::Zero(dim);
    e(k) = 1.0;
    return pure(e);
  }
  static DensityState maximally_mixed(int dim) {
    require(dim >= 1, ErrorKind::InvalidInput, "DensityState::maximally_mixed: dim must be >= 1");
    return DensityState(identity_matrix(dim) / static_cast<double>(dim));
  }

  int dim() const { return rho_.dim(); }
  const HermitianMatrix& rho() const { return rho_; }
  const CMatrix& matrix() const { return rho_.matrix(); }

 private:
  HermitianMatrix rho_;
};

/// Tr(rho a) for any square matrix a (complex in general).
inline cplx state_eval_complex(const DensityState& rho, const CMatrix& a) {
  require(rho.dim() == a.rows() && a.rows() == a.cols(), ErrorKind::Shape, "state_eval: dimension mismatch");
  return (rho.matrix().cwiseProduct(a.transpose())).sum();
}

inline double state_eval(const DensityState& rho, const HermitianMatrix& a) {
  return state_eval_complex(rho, a.matrix()).real();
}

// ---------------------------------------------------------------------------
// UnitaryMap

class UnitaryMap {
 public:
  UnitaryMap() = default;

  explicit UnitaryMap(const CMatrix& u) : u_(u) {
    require(u.rows() == u.cols() && u.rows() >= 1, ErrorKind::Shape, "UnitaryMap: matrix is not square");
    require(all_finite(u), ErrorKind::InvalidInput, "UnitaryMap: non-finite entries");
    const double defect = (u.adjoint() * u - identity_matrix(static_cast<int>(u.rows()))).norm();
    require(defect <= 1e-10, ErrorKind::InvalidInput, "UnitaryMap: matrix is not unitary");
  }

  static UnitaryMap identity(int n) { return UnitaryMap(identity_matrix(n)); }

  int dim() const { return static_cast<int>(u_.rows()); }
  const CMatrix& matrix() const { return u_; }

  /// The inner automorphism a -> U a U*.
  CMatrix apply(const CMatrix& a) const { return u_ * a * u_.adjoint(); }
  HermitianMatrix apply(const HermitianMatrix& a) const { return HermitianMatrix(apply(a.matrix())); }

  UnitaryMap inverse() const { return UnitaryMap(u_.adjoint()); }
  /// (this o other)(a) = this(other(a)).
  UnitaryMap compose(const UnitaryMap& other) const { return UnitaryMap(u_ * other.u_); }

 private:
  CMatrix u_;
};

// ---------------------------------------------------------------------------
// AlgebraSpec: the algebra M_{n1} (+) ... (+) M_{nb}, stored block-diagonally.

struct AlgebraSpec {
  std::vector<int> blocks;

  static AlgebraSpec full(int n) { return AlgebraSpec{{n}}; }
  static AlgebraSpec diagonal(int n) { return AlgebraSpec{std::vector<int>(static_cast<std::size_t>(n), 1)}; }

  void validate() const {
    require(!blocks.empty(), ErrorKind::InvalidInput, "AlgebraSpec: blocks must be nonempty");
    for (int b : blocks) require(b >= 1, ErrorKind::InvalidInput, "AlgebraSpec: block sizes must be positive");
  }

  int total_dim() const { return std::accumulate(blocks.begin(), blocks.end(), 0); }
  int real_dimension() const {
    int d = 0;
    for (int b : blocks) d += b * b;
    return d;
  }
  bool single_block() const { return blocks.size() == 1; }

  /// Block index of every row/column.
  std::vector<int> block_of() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < blocks.size(); ++k)
      for (int i = 0; i < blocks[k]; ++i) out.push_back(static_cast<int>(k));
    return out;
  }

  CMatrix project(const CMatrix& a) const {
    require(a.rows() == total_dim() && a.cols() == total_dim(), ErrorKind::Shape, "AlgebraSpec: dimension mismatch");
    const auto owner = block_of();
    CMatrix out = a;
    for (int i = 0; i < total_dim(); ++i)
      for (int j = 0; j < total_dim(); ++j)
        if (owner[static_cast<std::size_t>(i)] != owner[static_cast<std::size_t>(j)]) out(i, j) = 0.0;
    return out;
  }

  bool contains(const CMatrix& a, double tol = 1e-10) const {
    if (a.rows() != total_dim() || a.cols() != total_dim()) return false;
    return (a - project(a)).norm() <= tol * std::max(1.0, a.norm());
  }

  bool operator==(const AlgebraSpec&) const = default;
};

// ---------------------------------------------------------------------------
// HermitianBasis: orthonormal basis of sa(A) for <A,B> = Tr(A*B). The first
// element is 1/sqrt(N); the rest are traceless. Diagonal elements follow the
// generalized Gell-Mann pattern over the whole diagonal, off-diagonal ones are
// the real/imaginary symmetric pairs inside each block.

class HermitianBasis {
 public:
  HermitianBasis() = default;

  explicit HermitianBasis(const AlgebraSpec& algebra) : algebra_(algebra) {
    algebra.validate();
    const int n = algebra.total_dim();
    elements_.reserve(static_cast<std::size_t>(algebra.real_dimension()));
    elements_.push_back(identity_matrix(n) / std::sqrt(static_cast<double>(n)));
    for (int l = 1; l < n; ++l) {
      CMatrix e = CMatrix::Zero(n, n);
      const double norm = std::sqrt(static_cast<double>(l) * (l + 1));
      for (int i = 0; i < l; ++i) e(i, i) = 1.0 / norm;
      e(l, l) = -static_cast<double>(l) / norm;
      elements_.push_back(e);
    }
    int offset = 0;
    const double s = 1.0 / std::sqrt(2.0);
    for (int b : algebra.blocks) {
      for (int i = 0; i < b; ++i) {
        for (int j = i + 1; j < b; ++j) {
          CMatrix re = CMatrix::Zero(n, n);
          re(offset + i, offset + j) = s;
          re(offset + j, offset + i) = s;
          elements_.push_back(re);
          CMatrix im = CMatrix::Zero(n, n);
          im(offset + i, offset + j) = -kI * s;
          im(offset + j, offset + i) = kI * s;
          elements_.push_back(im);
        }
      }
      offset += b;
    }
  }

  /// Basis of the full algebra M_n.
  static HermitianBasis full(int n) { return HermitianBasis(AlgebraSpec::full(n)); }

  const AlgebraSpec& algebra() const { return algebra_; }
  int dim() const { return algebra_.total_dim(); }
  int size() const { return static_cast<int>(elements_.size()); }
  int traceless_size() const { return size() - 1; }
  const CMatrix& element(int k) const { return elements_[static_cast<std::size_t>(k)]; }
  const std::vector<CMatrix>& elements() const { return elements_; }

  /// x_k = Re Tr(e_k a).
  RVector coordinates(const HermitianMatrix& a) const {
    require(a.dim() == dim(), ErrorKind::Shape, "HermitianBasis::coordinates: dimension mismatch");
    RVector x(size());
    for (int k = 0; k < size(); ++k) x(k) = (element(k).cwiseProduct(a.matrix().transpose())).sum().real();
    return x;
  }

  /// Coordinates of the traceless part (all but the identity coordinate).
  RVector traceless_coordinates(const HermitianMatrix& a) const { return coordinates(a).tail(traceless_size()); }

  HermitianMatrix reconstruct(const RVector& x) const {
    require(x.size() == size(), ErrorKind::Shape, "HermitianBasis::reconstruct: coordinate count mismatch");
    CMatrix a = CMatrix::Zero(dim(), dim());
    for (int k = 0; k < size(); ++k) a += x(k) * element(k);
    return HermitianMatrix(a);
  }

  CMatrix reconstruct_traceless(const RVector& y) const {
    require(y.size() == traceless_size(), ErrorKind::Shape, "HermitianBasis: traceless coordinate count mismatch");
    CMatrix a = CMatrix::Zero(dim(), dim());
    for (int k = 0; k < traceless_size(); ++k) a += y(k) * element(k + 1);
    return a;
  }

 private:
  AlgebraSpec algebra_;
  std::vector<CMatrix> elements_;
};

// ---------------------------------------------------------------------------
// Seeded instance generators.

inline CMatrix gaussian_matrix(Rng& rng, int rows, int cols) {
  CMatrix g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      g(i, j) = cplx(re, im);
    }
  return g;
}

inline HermitianMatrix random_hermitian(std::uint64_t seed, int dim, double scale = 1.0) {
  require(dim >= 1, ErrorKind::InvalidInput, "random_hermitian: dim must be >= 1");
  require(scale > 0.0, ErrorKind::InvalidInput, "random_hermitian: scale must be positive");
  Rng rng(seed);
  return HermitianMatrix(scale * gaussian_matrix(rng, dim, dim));
}

/// Random Hermitian element of a block algebra.
inline HermitianMatrix random_hermitian(std::uint64_t seed, const AlgebraSpec& algebra, double scale = 1.0) {
  return HermitianMatrix(algebra.project(random_hermitian(seed, algebra.total_dim(), scale).matrix()));
}

inline DensityState random_state(std::uint64_t seed, int dim) {
  require(dim >= 1, ErrorKind::InvalidInput, "random_state: dim must be >= 1");
  Rng rng(seed);
  const CMatrix g = gaussian_matrix(rng, dim, dim);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityState(0.5 * (rho + rho.adjoint()));
}

/// Random state of a block algebra (block-diagonal density matrix).
inline DensityState random_state(std::uint64_t seed, const AlgebraSpec& algebra) {
  const DensityState s = random_state(seed, algebra.total_dim());
  CMatrix rho = algebra.project(s.matrix());
  rho /= rho.trace().real();
  return DensityState(rho);
}

inline DensityState random_pure_state(std::uint64_t seed, int dim) {
  require(dim >= 1, ErrorKind::InvalidInput, "random_pure_state: dim must be >= 1");
  Rng rng(seed);
  return DensityState::pure(gaussian_matrix(rng, dim, 1).col(0));
}

/// Random pure state of a block algebra: a random unit vector inside a block
/// chosen with probability proportional to its size.
inline DensityState random_pure_state(std::uint64_t seed, const AlgebraSpec& algebra) {
  Rng rng(seed);
  const int n = algebra.total_dim();
  const double pick = rng.uniform() * n;
  int offset = 0;
  for (int b : algebra.blocks) {
    if (pick < offset + b || offset + b == n) {
      CVector psi = CVector::Zero(n);
      psi.segment(offset, b) = gaussian_matrix(rng, b, 1).col(0);
      return DensityState::pure(psi);
    }
    offset += b;
  }
  return DensityState::maximally_mixed(n);
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of R's diagonal folded back into Q.
inline UnitaryMap random_unitary(std::uint64_t seed, int dim) {
  require(dim >= 1, ErrorKind::InvalidInput, "random_unitary: dim must be >= 1");
  Rng rng(seed);
  const CMatrix g = gaussian_matrix(rng, dim, dim);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * identity_matrix(dim);
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k) {
    const cplx d = r(k, k);
    const double mag = std::abs(d);
    if (mag > 0.0) q.col(k) *= d / mag;
  }
  // One Gram-Schmidt sweep removes residual round-off.
  for (int k = 0; k < dim; ++k) {
    for (int j = 0; j < k; ++j) q.col(k) -= q.col(j).dot(q.col(k)) * q.col(j);
    q.col(k).normalize();
  }
  return UnitaryMap(q);
}

/// exp(iK) for Hermitian K, via its spectral decomposition.
inline CMatrix unitary_exp(const HermitianMatrix& k) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(k.matrix());
  const Eigen::Index n = k.dim();
  CVector phases(n);
  for (Eigen::Index i = 0; i < n; ++i) phases(i) = std::exp(kI * eig.eigenvalues()(i));
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace qmetric
