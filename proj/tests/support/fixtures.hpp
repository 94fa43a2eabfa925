#pragma once

// Shared test instances.

#include "qmetric/lipnorms.hpp"

namespace qmetric::testing {

inline CMatrix pauli_x() {
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

/// The classical two-point space: blocks (1,1), D = [[0,1],[1,0]], L(diag(x,y)) = |x - y|.
inline AlgebraSpec two_point_algebra() { return AlgebraSpec::diagonal(2); }
inline LipNormSpec two_point_lipnorm() { return LipNormSpec::dirac(pauli_x()); }

/// A commutator Lip-norm on M_n with a random Hermitian D acting on C^n (x) C^m.
/// A single D on C^n always commutes with its own polynomials, so m >= 2.
inline LipNormSpec random_dirac(std::uint64_t seed, int n, int m = 2) {
  return LipNormSpec::dirac(random_hermitian(seed, n * m).matrix(), m);
}

/// Clock and Fourier-conjugated clock generators; together they generate M_n.
inline std::vector<CMatrix> clock_shift_generators(int n) {
  CMatrix clock = CMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) clock(k, k) = static_cast<double>(k) - 0.5 * (n - 1);
  CMatrix f(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) f(j, k) = std::polar(1.0 / std::sqrt(n), 2.0 * std::numbers::pi * j * k / n);
  return {clock, f * clock * f.adjoint()};
}

}  // namespace qmetric::testing
