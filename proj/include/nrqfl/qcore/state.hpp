#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrqfl/qcore/complex_matrix.hpp"
#include "nrqfl/qcore/eigen.hpp"

namespace nrqfl::qcore {

inline constexpr double kTolerance = 1e-10;
inline constexpr std::size_t kMaxQubits = 6;

/// Density matrix of an n-qubit register, 1 <= n <= 6.
///
/// Basis index bit q corresponds to qubit q (qubit 0 is the least significant
/// bit). Construction through `from_matrix` validates Hermiticity, unit trace
/// and positive semidefiniteness; the simulator's own operations preserve
/// these and skip revalidation.
class DensityMatrix {
 public:
  static DensityMatrix from_matrix(ComplexMatrix m) {
    const std::size_t n = qubits_for_dimension(m.rows());
    if (!m.is_square()) throw std::invalid_argument("DensityMatrix: matrix not square");
    if (!m.is_hermitian(kTolerance)) throw std::invalid_argument("DensityMatrix: not Hermitian");
    if (std::abs(m.trace() - Complex{1.0, 0.0}) > kTolerance)
      throw std::invalid_argument("DensityMatrix: trace != 1");
    const auto eig = hermitian_eigenvalues(m);
    if (eig.front() < -kTolerance)
      throw std::invalid_argument("DensityMatrix: negative eigenvalue " + std::to_string(eig.front()));
    return DensityMatrix(n, std::move(m));
  }

  /// Trusted construction for results of CPTP operations.
  static DensityMatrix unchecked(ComplexMatrix m) {
    const std::size_t n = qubits_for_dimension(m.rows());
    return DensityMatrix(n, std::move(m));
  }

  /// |0...0><0...0| on n qubits.
  static DensityMatrix ground(std::size_t n_qubits) {
    ComplexMatrix m(std::size_t{1} << n_qubits, std::size_t{1} << n_qubits);
    m(0, 0) = 1.0;
    return unchecked(std::move(m));
  }

  /// I / 2^n.
  static DensityMatrix maximally_mixed(std::size_t n_qubits) {
    const std::size_t dim = std::size_t{1} << n_qubits;
    return unchecked(ComplexMatrix::identity(dim) * Complex{1.0 / static_cast<double>(dim), 0.0});
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return matrix_.rows(); }
  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  Complex operator()(std::size_t r, std::size_t c) const { return matrix_(r, c); }

  /// Probability that measuring `qubit` yields 1.
  double probability_one(std::size_t qubit) const {
    require_qubit(qubit);
    double p = 0.0;
    for (std::size_t i = 0; i < dimension(); ++i)
      if ((i >> qubit) & 1U) p += matrix_(i, i).real();
    return p;
  }

  double min_eigenvalue() const { return hermitian_eigenvalues(matrix_).front(); }

  void require_qubit(std::size_t qubit) const {
    if (qubit >= n_qubits_)
      throw std::out_of_range("qubit index " + std::to_string(qubit) + " out of range for " +
                              std::to_string(n_qubits_) + "-qubit register");
  }

 private:
  DensityMatrix(std::size_t n, ComplexMatrix m) : n_qubits_(n), matrix_(std::move(m)) {}

  static std::size_t qubits_for_dimension(std::size_t dim) {
    for (std::size_t n = 1; n <= kMaxQubits; ++n)
      if (dim == (std::size_t{1} << n)) return n;
    throw std::invalid_argument("DensityMatrix: dimension " + std::to_string(dim) +
                                " is not 2^n for 1 <= n <= 6");
  }

  std::size_t n_qubits_;
  ComplexMatrix matrix_;
};

/// |psi><psi| for a unit-norm amplitude vector of length 2^n, n in 1..6.
inline DensityMatrix make_pure_state(std::span<const Complex> amplitudes) {
  const std::size_t dim = amplitudes.size();
  if (dim < 2 || dim > 64 || (dim & (dim - 1)) != 0)
    throw std::invalid_argument("make_pure_state: length " + std::to_string(dim) +
                                " is not a power of two in [2, 64]");
  double norm2 = 0.0;
  for (const auto& a : amplitudes) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
      throw std::invalid_argument("make_pure_state: non-finite amplitude");
    norm2 += std::norm(a);
  }
  if (std::abs(std::sqrt(norm2) - 1.0) > kTolerance)
    throw std::invalid_argument("make_pure_state: amplitudes not unit norm");
  ComplexMatrix m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = amplitudes[r] * std::conj(amplitudes[c]);
  return DensityMatrix::unchecked(std::move(m));
}

inline DensityMatrix make_pure_state(std::initializer_list<Complex> amplitudes) {
  return make_pure_state(std::span<const Complex>(amplitudes.begin(), amplitudes.size()));
}

// -- single-qubit gates ------------------------------------------------------

namespace gates {

inline ComplexMatrix identity() { return ComplexMatrix::identity(2); }
inline ComplexMatrix pauli_x() { return {{0.0, 1.0}, {1.0, 0.0}}; }
inline ComplexMatrix pauli_y() { return {{0.0, Complex{0.0, -1.0}}, {Complex{0.0, 1.0}, 0.0}}; }
inline ComplexMatrix pauli_z() { return {{1.0, 0.0}, {0.0, -1.0}}; }
inline ComplexMatrix hadamard() {
  const double s = 1.0 / std::numbers::sqrt2;
  return {{s, s}, {s, -s}};
}

}  // namespace gates

/// Rotation about the Y axis: [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]].
inline ComplexMatrix ry(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("ry: non-finite angle");
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  return {{c, -s}, {s, c}};
}

namespace detail {

// Returns op_t * m, where op_t acts as `op` on qubit `t` and identity elsewhere.
inline ComplexMatrix left_apply(const ComplexMatrix& op, const ComplexMatrix& m, std::size_t t) {
  ComplexMatrix out = m;
  const std::size_t dim = m.rows();
  const std::size_t bit = std::size_t{1} << t;
  const Complex u00 = op(0, 0), u01 = op(0, 1), u10 = op(1, 0), u11 = op(1, 1);
  for (std::size_t i0 = 0; i0 < dim; ++i0) {
    if (i0 & bit) continue;
    const std::size_t i1 = i0 | bit;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const Complex a = m(i0, c);
      const Complex b = m(i1, c);
      out(i0, c) = u00 * a + u01 * b;
      out(i1, c) = u10 * a + u11 * b;
    }
  }
  return out;
}

// Returns m * op_t^dagger.
inline ComplexMatrix right_apply_adjoint(const ComplexMatrix& m, const ComplexMatrix& op, std::size_t t) {
  ComplexMatrix out = m;
  const std::size_t dim = m.cols();
  const std::size_t bit = std::size_t{1} << t;
  const Complex c00 = std::conj(op(0, 0)), c01 = std::conj(op(0, 1));
  const Complex c10 = std::conj(op(1, 0)), c11 = std::conj(op(1, 1));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t j0 = 0; j0 < dim; ++j0) {
      if (j0 & bit) continue;
      const std::size_t j1 = j0 | bit;
      const Complex a = m(r, j0);
      const Complex b = m(r, j1);
      out(r, j0) = a * c00 + b * c01;
      out(r, j1) = a * c10 + b * c11;
    }
  }
  return out;
}

inline ComplexMatrix conjugate_local(const ComplexMatrix& op, const ComplexMatrix& m, std::size_t t) {
  return right_apply_adjoint(left_apply(op, m, t), op, t);
}

}  // namespace detail

/// rho -> U_t rho U_t^dagger for a 2x2 unitary acting on `target_qubit`.
inline DensityMatrix apply_unitary(const DensityMatrix& state, const ComplexMatrix& u,
                                   std::size_t target_qubit) {
  if (u.rows() != 2 || u.cols() != 2) throw std::invalid_argument("apply_unitary: gate must be 2x2");
  if (!u.is_unitary(kTolerance)) throw std::invalid_argument("apply_unitary: gate is not unitary");
  state.require_qubit(target_qubit);
  return DensityMatrix::unchecked(detail::conjugate_local(u, state.matrix(), target_qubit));
}

/// Hermitian observable.
class Observable {
 public:
  explicit Observable(ComplexMatrix m) : matrix_(std::move(m)) {
    if (!matrix_.is_hermitian(kTolerance)) throw std::invalid_argument("Observable: not Hermitian");
  }

  static Observable pauli_z() { return Observable(gates::pauli_z()); }
  static Observable pauli_x() { return Observable(gates::pauli_x()); }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }

 private:
  ComplexMatrix matrix_;
};

/// Tr(M rho).
inline double expectation(const DensityMatrix& state, const Observable& m) {
  const auto& mm = m.matrix();
  if (mm.rows() != state.dimension())
    throw std::invalid_argument("expectation: observable dimension " + std::to_string(mm.rows()) +
                                " != state dimension " + std::to_string(state.dimension()));
  Complex t{0.0, 0.0};
  const auto& rho = state.matrix();
  for (std::size_t i = 0; i < mm.rows(); ++i)
    for (std::size_t k = 0; k < mm.cols(); ++k) t += mm(i, k) * rho(k, i);
  return t.real();
}

/// (1/2) sum |lambda_i| over the eigenvalues of rho - sigma.
inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dimension() != sigma.dimension())
    throw std::invalid_argument("trace_distance: dimension mismatch");
  const auto eig = hermitian_eigenvalues(rho.matrix() - sigma.matrix());
  double s = 0.0;
  for (double l : eig) s += std::abs(l);
  return std::clamp(0.5 * s, 0.0, 1.0);
}

}  // namespace nrqfl::qcore
