#include "kgr/matrix.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "kgr/errors.hpp"

namespace kgr {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
  assert(rows >= 0 && cols >= 0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> values) : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for shape " + shape_str());
  }
}

std::string Matrix::shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (!same_shape(o)) throw ShapeError("Matrix +=: " + shape_str() + " vs " + o.shape_str());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: dimension mismatch " + a.shape_str() + " * " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  // ikj order: streams over b and out rows
  for (int i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto b_row = b.row(k);
      for (int j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

MatmulGrads matmul_backward(const Matrix& grad_out, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul_backward: dimension mismatch " + a.shape_str() + " * " + b.shape_str());
  }
  if (grad_out.rows() != a.rows() || grad_out.cols() != b.cols()) {
    throw ShapeError("matmul_backward: cotangent " + grad_out.shape_str() + " for product " +
                     std::to_string(a.rows()) + "x" + std::to_string(b.cols()));
  }
  MatmulGrads g;
  g.grad_a = matmul(grad_out, transpose(b));
  g.grad_b = matmul(transpose(a), grad_out);
  return g;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix relu_backward(const Matrix& grad_out, const Matrix& x) {
  if (!grad_out.same_shape(x)) {
    throw ShapeError("relu_backward: " + grad_out.shape_str() + " vs " + x.shape_str());
  }
  Matrix out(x.rows(), x.cols());
  const auto gv = grad_out.values();
  const auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > 0.0 ? gv[i] : 0.0;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax_row(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> softmax_row_backward(std::span<const double> grad_out, std::span<const double> y) {
  assert(grad_out.size() == y.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += grad_out[i] * y[i];
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * (grad_out[i] - dot);
  return out;
}

}  // namespace kgr
