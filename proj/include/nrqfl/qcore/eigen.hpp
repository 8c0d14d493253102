#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nrqfl/qcore/complex_matrix.hpp"

namespace nrqfl::qcore {

namespace detail {

// Cyclic Jacobi eigenvalue iteration for a dense real symmetric matrix stored
// row-major in `a` (n x n). Destroys `a`; returns the diagonal after
// convergence.
inline std::vector<double> jacobi_symmetric(std::vector<double> a, std::size_t n) {
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      diag += at(p, p) * at(p, p);
      for (std::size_t q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
    }
    if (off <= 1e-30 * std::max(diag, 1e-300) || off < 1e-300) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = at(p, p);
        const double aqq = at(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
  return eig;
}

}  // namespace detail

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// H = A + iB is embedded as the real symmetric [[A, -B], [B, A]], whose
/// spectrum is that of H with every eigenvalue doubled; the pairs are folded
/// back after sorting.
inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& h) {
  if (!h.is_square()) throw std::invalid_argument("hermitian_eigenvalues: matrix not square");
  const std::size_t n = h.rows();
  const std::size_t m = 2 * n;
  std::vector<double> real(m * m);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      // Symmetrize so that tiny Hermiticity drift cannot break Jacobi.
      const Complex z = 0.5 * (h(r, c) + std::conj(h(c, r)));
      real[r * m + c] = z.real();
      real[(r + n) * m + (c + n)] = z.real();
      real[r * m + (c + n)] = -z.imag();
      real[(r + n) * m + c] = z.imag();
    }
  }
  auto doubled = detail::jacobi_symmetric(std::move(real), m);
  std::sort(doubled.begin(), doubled.end());
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = 0.5 * (doubled[2 * i] + doubled[2 * i + 1]);
  return eig;
}

}  // namespace nrqfl::qcore
