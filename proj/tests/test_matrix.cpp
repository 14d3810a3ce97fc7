#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "kgr/errors.hpp"
#include "kgr/matrix.hpp"
#include "kgr/rng.hpp"

using namespace kgr;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.next_real(lo, hi);
  return m;
}

// independent finite-difference oracle: derivative of sum(w .* f(x)) w.r.t.
// each element of x
double central_diff(const std::function<double()>& f, double& x, double step = 1e-5) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

double weighted_sum(const Matrix& m, const Matrix& w) {
  double s = 0.0;
  const auto mv = m.values();
  const auto wv = w.values();
  for (std::size_t i = 0; i < mv.size(); ++i) s += mv[i] * wv[i];
  return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("matmul identity and hand-computed products") {
  const Matrix I(2, 2, {1, 0, 0, 1});
  const Matrix a(2, 2, {1, 2, 3, 4});
  CHECK(matmul(I, a) == a);

  const Matrix b(2, 1, {0, 1});
  const Matrix prod = matmul(a, b);
  CHECK(prod.rows() == 2);
  CHECK(prod.cols() == 1);
  CHECK(prod(0, 0) == 2.0);
  CHECK(prod(1, 0) == 4.0);

  Matrix zero(3, 2);
  const Matrix rhs(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  const Matrix annihilated = matmul(zero, rhs);
  for (double v : annihilated.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul rejects mismatched shapes, naming both operands") {
  const Matrix a(2, 3);
  const Matrix b(4, 5);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("4x5") != std::string::npos);
  }
}

TEST_CASE("matmul_backward identity substitution and zero cotangent") {
  const Matrix I(2, 2, {1, 0, 0, 1});
  const Matrix b(2, 2, {1, 2, 3, 4});
  const auto g = matmul_backward(I, I, b);
  CHECK(g.grad_a == transpose(b));
  CHECK(g.grad_b == I);

  Matrix zero(2, 2);
  const auto gz = matmul_backward(zero, I, b);
  for (double v : gz.grad_a.values()) CHECK(v == 0.0);
  for (double v : gz.grad_b.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul_backward agrees with finite differences on random shapes") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 1 + rng.next_int(8);
    const int k = 1 + rng.next_int(8);
    const int m = 1 + rng.next_int(8);
    Matrix a = random_matrix(n, k, rng);
    Matrix b = random_matrix(k, m, rng);
    const Matrix w = random_matrix(n, m, rng);

    const auto grads = matmul_backward(w, a, b);
    const auto loss = [&] { return weighted_sum(matmul(a, b), w); };

    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const double fd = central_diff(loss, a(i, j));
        CHECK(rel_err(grads.grad_a(i, j), fd) < 1e-4);
      }
    }
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < m; ++j) {
        const double fd = central_diff(loss, b(i, j));
        CHECK(rel_err(grads.grad_b(i, j), fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("matmul is associative on random triples") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 5, rng);
    const Matrix c = random_matrix(5, 2, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      CHECK(rel_err(left.values()[i], right.values()[i]) < 1e-9);
    }
  }
}

TEST_CASE("relu forward and backward mask") {
  const Matrix x(1, 3, {-1, 0, 2});
  const Matrix y = relu(x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == 2.0);

  const Matrix g(1, 3, {1, 1, 1});
  const Matrix gx = relu_backward(g, x);
  CHECK(gx(0, 0) == 0.0);
  CHECK(gx(0, 1) == 0.0);  // subgradient at 0 is 0
  CHECK(gx(0, 2) == 1.0);
}

TEST_CASE("relu backward agrees with finite differences away from kinks") {
  Rng rng(13);
  Matrix x(4, 4);
  for (double& v : x.values()) {
    v = rng.next_real(0.2, 2.0) * (rng.next_bool() ? 1.0 : -1.0);  // keep clear of 0
  }
  const Matrix w = random_matrix(4, 4, rng);
  const Matrix grads = relu_backward(w, x);
  const auto loss = [&] { return weighted_sum(relu(x), w); };
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double fd = central_diff(loss, x(i, j));
      CHECK(rel_err(grads(i, j), fd) < 1e-6);
    }
  }
}

TEST_CASE("sigmoid fixed points and symmetry") {
  CHECK(sigmoid(0.0) == 0.5);
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const double x = rng.next_real(-30.0, 30.0);
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-12);
  }
}

TEST_CASE("sigmoid is stable for large inputs") {
  const double high = sigmoid(500.0);
  CHECK(high > 1.0 - 1e-12);
  CHECK(high <= 1.0);
  // extended-precision oracle
  const long double oracle = 1.0L / (1.0L + std::exp(-500.0L));
  CHECK(std::abs(high - static_cast<double>(oracle)) < 1e-15);

  const double low = sigmoid(-500.0);
  CHECK(low >= 0.0);
  CHECK(low < 1e-12);

  for (double x : {-700.0, -100.0, -1.0, 0.0, 1.0, 100.0, 700.0}) {
    const double v = sigmoid(x);
    CHECK(std::isfinite(v));
    if (x > -700.0) CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("softmax_row uniform, shift invariance, direct formula") {
  const std::vector<double> zeros{0, 0, 0};
  const auto uniform = softmax_row(zeros);
  for (double v : uniform) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  const std::vector<double> logits{1, 2, 3};
  const auto p = softmax_row(logits);
  double denom = 0.0;
  for (double a : logits) denom += std::exp(a);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(p[i] - std::exp(logits[i]) / denom) < 1e-12);
  }

  // constant shifts cancel exactly after max subtraction
  const std::vector<double> shifted{1 + 7.5, 2 + 7.5, 3 + 7.5};
  const auto ps = softmax_row(shifted);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == ps[i]);
}

TEST_CASE("softmax_row outputs probability vectors and preserves argmax") {
  Rng rng(19);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> logits(1 + rng.next_int(8));
    for (double& v : logits) v = rng.next_real(-50.0, 50.0);
    const auto p = softmax_row(logits);
    double sum = 0.0;
    std::size_t argmax_in = 0, argmax_out = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] >= 0.0);
      sum += p[i];
      if (logits[i] > logits[argmax_in]) argmax_in = i;
      if (p[i] > p[argmax_out]) argmax_out = i;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(argmax_in == argmax_out);
  }
}

TEST_CASE("softmax_row_backward matches finite differences") {
  Rng rng(23);
  std::vector<double> logits(5);
  for (double& v : logits) v = rng.next_real(-2.0, 2.0);
  std::vector<double> w(5);
  for (double& v : w) v = rng.next_real(-1.0, 1.0);

  const auto y = softmax_row(logits);
  const auto grad = softmax_row_backward(w, y);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto loss = [&] {
      const auto p = softmax_row(logits);
      double s = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) s += w[j] * p[j];
      return s;
    };
    const double fd = central_diff(loss, logits[i]);
    CHECK(rel_err(grad[i], fd) < 1e-6);
  }
}

TEST_CASE("operations keep values finite for finite inputs") {
  Rng rng(29);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = random_matrix(5, 5, rng, -100.0, 100.0);
    const Matrix b = random_matrix(5, 5, rng, -100.0, 100.0);
    CHECK(matmul(a, b).all_finite());
    CHECK(relu(a).all_finite());
    const auto g = matmul_backward(a, b, a);
    CHECK(g.grad_a.all_finite());
    CHECK(g.grad_b.all_finite());
  }
}
