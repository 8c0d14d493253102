#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace nrqfl::qcore {

using Complex = std::complex<double>;

/// Dense complex matrix, row-major. Sized for registers of at most 6 qubits
/// (64 x 64), so no attempt is made at blocking or sparsity.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;

  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Complex{0.0, 0.0}) {}

  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("ComplexMatrix: entry count " + std::to_string(data_.size()) +
                                  " != rows*cols " + std::to_string(rows_ * cols_));
    }
    for (const auto& z : data_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw std::invalid_argument("ComplexMatrix: non-finite entry");
      }
    }
  }

  /// Row-wise literal, e.g. {{1, 0}, {0, -1}}.
  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw std::invalid_argument("ComplexMatrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }
  const std::vector<Complex>& entries() const noexcept { return data_; }

  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  Complex trace() const {
    Complex t{0.0, 0.0};
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  ComplexMatrix& operator*=(Complex s) {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("ComplexMatrix: inner dimension mismatch");
    ComplexMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex{0.0, 0.0}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  /// Largest |a_ij - b_ij|.
  double max_abs_diff(const ComplexMatrix& o) const {
    require_same_shape(o);
    double m = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - o.data_[i]));
    return m;
  }

  bool is_hermitian(double tol) const {
    if (!is_square()) return false;
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = r; c < cols_; ++c)
        if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol) return false;
    return true;
  }

  bool is_unitary(double tol) const {
    if (!is_square()) return false;
    return ((*this) * adjoint() - identity(rows_)).frobenius_norm() < tol;
  }

 private:
  void require_same_shape(const ComplexMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw std::invalid_argument("ComplexMatrix: shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

/// Debug dump: nested arrays of [re, im] pairs.
inline nlohmann::json to_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ComplexMatrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix json: expected array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  std::vector<Complex> entries;
  entries.reserve(rows * cols);
  for (const auto& row : j) {
    if (row.size() != cols) throw std::invalid_argument("matrix json: ragged rows");
    for (const auto& z : row) entries.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
  }
  return ComplexMatrix(rows, cols, std::move(entries));
}

}  // namespace nrqfl::qcore
