#pragma once

#include <span>
#include <string>
#include <vector>

namespace kgr {

/// Dense row-major matrix of doubles: the single numeric carrier for node
/// features, layer weights, probability tables and gradients.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols);  // zero-initialized
  Matrix(int rows, int cols, std::vector<double> values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;  // e.g. "3x4"

  void fill(double v);
  bool all_finite() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

struct MatmulGrads {
  Matrix grad_a;
  Matrix grad_b;
};
// grad_a = grad_out * b^T, grad_b = a^T * grad_out
MatmulGrads matmul_backward(const Matrix& grad_out, const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Elementwise max(0, x); the backward defines the subgradient at 0 as 0.
Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& grad_out, const Matrix& x);

// Numerically stable logistic: branches on sign so exp never overflows.
double sigmoid(double x);

// Max-subtracted softmax over one logit vector.
std::vector<double> softmax_row(std::span<const double> logits);
// Vector-Jacobian product of softmax_row given its output y.
std::vector<double> softmax_row_backward(std::span<const double> grad_out, std::span<const double> y);

}  // namespace kgr
