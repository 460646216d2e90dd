// Compares the OpenMP kernels against their serial reference
// implementations and reports throughput plus bitwise agreement.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gat/kernels.hpp"
#include "gat/tensor.hpp"

using namespace gat;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

std::vector<double> random_buffer(Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool bitwise_equal) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name.c_str(),
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              bitwise_equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without openmp\n");
#endif
  Rng rng(7);
  const int repeats = 20;

  {
    const int m = 384, k = 384, n = 384;
    auto a = random_buffer(rng, m * k);
    auto b = random_buffer(rng, k * n);
    std::vector<double> c1(static_cast<std::size_t>(m) * n), c2 = c1;
    const double ts = time_ms([&] { kernels::ref::matmul_nn(a.data(), b.data(), c1.data(), m, k, n, false); }, repeats);
    const double tp = time_ms([&] { kernels::matmul_nn(a.data(), b.data(), c2.data(), m, k, n, false); }, repeats);
    report("matmul_nn 384x384x384", ts, tp, c1 == c2);
  }
  {
    const int m = 384, q = 384, p = 384;
    auto a = random_buffer(rng, m * q);
    auto b = random_buffer(rng, p * q);
    std::vector<double> c1(static_cast<std::size_t>(m) * p), c2 = c1;
    const double ts = time_ms([&] { kernels::ref::matmul_nt(a.data(), b.data(), c1.data(), m, q, p, false); }, repeats);
    const double tp = time_ms([&] { kernels::matmul_nt(a.data(), b.data(), c2.data(), m, q, p, false); }, repeats);
    report("matmul_nt 384x384x384", ts, tp, c1 == c2);
  }
  {
    const int outer = 4096, len = 256;
    auto x = random_buffer(rng, outer * len);
    std::vector<double> y1(static_cast<std::size_t>(outer) * len), y2 = y1;
    const double ts = time_ms([&] { kernels::ref::softmax(x.data(), y1.data(), outer, len, 1); }, repeats);
    const double tp = time_ms([&] { kernels::softmax(x.data(), y2.data(), outer, len, 1); }, repeats);
    report("softmax 4096x256", ts, tp, y1 == y2);
  }
  {
    const int rows = 4096, cols = 256;
    auto x = random_buffer(rng, rows * cols);
    auto gamma = random_buffer(rng, cols);
    auto beta = random_buffer(rng, cols);
    std::vector<double> y1(static_cast<std::size_t>(rows) * cols), y2 = y1;
    std::vector<double> xhat1 = y1, xhat2 = y1;
    std::vector<double> rstd1(static_cast<std::size_t>(rows)), rstd2 = rstd1;
    const double ts = time_ms(
        [&] { kernels::ref::layer_norm(x.data(), gamma.data(), beta.data(), y1.data(), xhat1.data(), rstd1.data(), rows, cols, 1e-5); },
        repeats);
    const double tp = time_ms(
        [&] { kernels::layer_norm(x.data(), gamma.data(), beta.data(), y2.data(), xhat2.data(), rstd2.data(), rows, cols, 1e-5); },
        repeats);
    report("layer_norm 4096x256", ts, tp, y1 == y2 && xhat1 == xhat2);
  }
  {
    const int n = 1 << 22;
    auto a = random_buffer(rng, n);
    auto b = random_buffer(rng, n);
    std::vector<double> c1(static_cast<std::size_t>(n)), c2 = c1;
    const double ts = time_ms([&] { kernels::ref::add(a.data(), b.data(), c1.data(), n); }, repeats);
    const double tp = time_ms([&] { kernels::add(a.data(), b.data(), c2.data(), n); }, repeats);
    report("add 4M", ts, tp, c1 == c2);
  }
  return 0;
}
