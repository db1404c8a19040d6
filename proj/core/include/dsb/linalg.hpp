#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dsb {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sized for covariance work (d up to a few thousand).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double trace() const noexcept;
  double frobenius_norm() const noexcept;
  /// Largest |A(i,j) - A(j,i)|.
  double asymmetry() const noexcept;
  Matrix transposed() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Matrix operator-(const Matrix& a, const Matrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Lower-triangular Cholesky factor of a symmetric matrix (only the lower
/// triangle is read). Returns nullopt when a pivot falls to or below
/// `pivot_floor` times the mean diagonal entry.
std::optional<Matrix> cholesky(const Matrix& a, double pivot_floor = 0.0);

/// Solves L y = b in place (L lower triangular).
void forward_substitute(const Matrix& lower, std::span<double> b);
/// Solves L^T y = b in place.
void backward_substitute_transposed(const Matrix& lower, std::span<double> b);

struct SymmetricEigen {
  Vector values;
  Matrix vectors;  // column j is the eigenvector for values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition. Sweeps until the off-diagonal Frobenius
/// norm drops below `relative_tolerance * ||A||_F`.
SymmetricEigen jacobi_eigen(const Matrix& a, double relative_tolerance = 1e-11,
                            int max_sweeps = 100);

}  // namespace dsb
