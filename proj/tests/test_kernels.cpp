#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gat/kernels.hpp"
#include "gat/tensor.hpp"

using namespace gat;

namespace {

std::vector<double> random_buffer(Rng& rng, int n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

// The OpenMP kernels assign each output element to exactly one iteration, so
// they must agree with the serial reference bit for bit, not just within a
// tolerance.

TEST_CASE("matmul variants match the serial reference exactly") {
  Rng rng(17);
  for (auto [m, k, n] : {std::tuple{3, 4, 5}, {64, 96, 80}, {1, 1, 1}, {128, 32, 128}}) {
    auto a = random_buffer(rng, m * k);
    auto b = random_buffer(rng, k * n);
    std::vector<double> c1(static_cast<std::size_t>(m) * n, 0.5);
    std::vector<double> c2 = c1;
    kernels::matmul_nn(a.data(), b.data(), c1.data(), m, k, n, true);
    kernels::ref::matmul_nn(a.data(), b.data(), c2.data(), m, k, n, true);
    CHECK(c1 == c2);

    auto bt = random_buffer(rng, n * k);
    std::vector<double> d1(static_cast<std::size_t>(m) * n, 0.0);
    std::vector<double> d2 = d1;
    kernels::matmul_nt(a.data(), bt.data(), d1.data(), m, k, n, false);
    kernels::ref::matmul_nt(a.data(), bt.data(), d2.data(), m, k, n, false);
    CHECK(d1 == d2);

    auto at = random_buffer(rng, n * m);
    std::vector<double> e1(static_cast<std::size_t>(m) * k, 1.0);
    std::vector<double> e2 = e1;
    kernels::matmul_tn(at.data(), a.data(), e1.data(), n, m, k, true);
    kernels::ref::matmul_tn(at.data(), a.data(), e2.data(), n, m, k, true);
    CHECK(e1 == e2);
  }
}

TEST_CASE("softmax forward and backward match the serial reference exactly") {
  Rng rng(23);
  for (auto [outer, len, inner] : {std::tuple{2, 5, 1}, {40, 64, 1}, {4, 7, 3}, {1, 300, 2}}) {
    const int n = outer * len * inner;
    auto x = random_buffer(rng, n, -5.0, 5.0);
    std::vector<double> y1(static_cast<std::size_t>(n)), y2 = y1;
    kernels::softmax(x.data(), y1.data(), outer, len, inner);
    kernels::ref::softmax(x.data(), y2.data(), outer, len, inner);
    CHECK(y1 == y2);

    auto dy = random_buffer(rng, n);
    std::vector<double> dx1(static_cast<std::size_t>(n), 0.25), dx2 = dx1;
    kernels::softmax_backward(y1.data(), dy.data(), dx1.data(), outer, len, inner);
    kernels::ref::softmax_backward(y2.data(), dy.data(), dx2.data(), outer, len, inner);
    CHECK(dx1 == dx2);
  }
}

TEST_CASE("layer_norm forward and backward match the serial reference exactly") {
  Rng rng(31);
  for (auto [rows, cols] : {std::pair{1, 8}, {32, 64}, {100, 48}}) {
    const int n = rows * cols;
    auto x = random_buffer(rng, n);
    auto gamma = random_buffer(rng, cols, 0.5, 1.5);
    auto beta = random_buffer(rng, cols);
    std::vector<double> y1(static_cast<std::size_t>(n)), xhat1(static_cast<std::size_t>(n));
    std::vector<double> rstd1(static_cast<std::size_t>(rows));
    auto y2 = y1, xhat2 = xhat1;
    auto rstd2 = rstd1;
    kernels::layer_norm(x.data(), gamma.data(), beta.data(), y1.data(), xhat1.data(),
                        rstd1.data(), rows, cols, 1e-6);
    kernels::ref::layer_norm(x.data(), gamma.data(), beta.data(), y2.data(), xhat2.data(),
                             rstd2.data(), rows, cols, 1e-6);
    CHECK(y1 == y2);
    CHECK(xhat1 == xhat2);
    CHECK(rstd1 == rstd2);

    auto dy = random_buffer(rng, n);
    std::vector<double> dx1(static_cast<std::size_t>(n), 0.0), dx2 = dx1;
    std::vector<double> dg1(static_cast<std::size_t>(cols), 0.0), dg2 = dg1;
    std::vector<double> db1(static_cast<std::size_t>(cols), 0.0), db2 = db1;
    kernels::layer_norm_backward(dy.data(), xhat1.data(), rstd1.data(), gamma.data(), dx1.data(),
                                 dg1.data(), db1.data(), rows, cols);
    kernels::ref::layer_norm_backward(dy.data(), xhat2.data(), rstd2.data(), gamma.data(),
                                      dx2.data(), dg2.data(), db2.data(), rows, cols);
    CHECK(dx1 == dx2);
    CHECK(dg1 == dg2);
    CHECK(db1 == db2);
  }
}

TEST_CASE("elementwise kernels match the serial reference exactly") {
  Rng rng(41);
  for (int n : {7, 5000}) {
    auto a = random_buffer(rng, n);
    auto b = random_buffer(rng, n);
    std::vector<double> c1(static_cast<std::size_t>(n)), c2 = c1;

    kernels::add(a.data(), b.data(), c1.data(), n);
    kernels::ref::add(a.data(), b.data(), c2.data(), n);
    CHECK(c1 == c2);

    kernels::mul(a.data(), b.data(), c1.data(), n);
    kernels::ref::mul(a.data(), b.data(), c2.data(), n);
    CHECK(c1 == c2);

    kernels::affine(a.data(), 1.5, -0.25, c1.data(), n);
    kernels::ref::affine(a.data(), 1.5, -0.25, c2.data(), n);
    CHECK(c1 == c2);

    kernels::relu(a.data(), c1.data(), n);
    kernels::ref::relu(a.data(), c2.data(), n);
    CHECK(c1 == c2);

    kernels::sigmoid(a.data(), c1.data(), n);
    kernels::ref::sigmoid(a.data(), c2.data(), n);
    CHECK(c1 == c2);

    std::vector<double> dx1(static_cast<std::size_t>(n), 0.125), dx2 = dx1;
    kernels::relu_backward(a.data(), b.data(), dx1.data(), n);
    kernels::ref::relu_backward(a.data(), b.data(), dx2.data(), n);
    CHECK(dx1 == dx2);
  }
}
