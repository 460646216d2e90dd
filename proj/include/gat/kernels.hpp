#pragma once

#include <cstddef>

namespace gat::kernels {

// Dense numeric kernels behind the tensor ops. The OpenMP variants split
// work so that every output element is produced by exactly one iteration
// with a serial inner reduction; results are therefore bitwise identical
// to the serial reference implementations in kernels::ref at any thread
// count. The parity tests in tests/test_kernels.cpp assert exact equality
// and tools/bench_kernels compares their throughput.

// c[m x n] = a[m x k] * b[k x n]           (accumulate: c += ...)
void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate);

// c[m x p] = a[m x q] * b[p x q]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int q,
               int p, bool accumulate);

// c[k x n] = a[m x k]^T * b[m x n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate);

// Softmax along the middle extent of an (outer, len, inner) view of x.
// Max-subtracted for stability; each slice sums to 1.
void softmax(const double* x, double* y, int outer, int len, int inner);

// dx += softmax backward given forward output y and upstream dy.
void softmax_backward(const double* y, const double* dy, double* dx,
                      int outer, int len, int inner);

// Per-row normalization of x[rows x cols] to zero mean / unit variance,
// then y = xhat * gamma + beta. Saves xhat and 1/stddev for backward.
void layer_norm(const double* x, const double* gamma, const double* beta,
                double* y, double* xhat, double* rstd, int rows, int cols,
                double eps);

void layer_norm_backward(const double* dy, const double* xhat,
                         const double* rstd, const double* gamma, double* dx,
                         double* dgamma, double* dbeta, int rows, int cols);

// Elementwise.
void add(const double* a, const double* b, double* c, int n);
void mul(const double* a, const double* b, double* c, int n);
void affine(const double* x, double scale, double shift, double* y, int n);
void relu(const double* x, double* y, int n);
void relu_backward(const double* x, const double* dy, double* dx, int n);
void sigmoid(const double* x, double* y, int n);

namespace ref {
// Serial reference implementations, kept for parity testing and as the
// baseline side of the kernel benchmark.
void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c, int m, int q,
               int p, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate);
void softmax(const double* x, double* y, int outer, int len, int inner);
void softmax_backward(const double* y, const double* dy, double* dx,
                      int outer, int len, int inner);
void layer_norm(const double* x, const double* gamma, const double* beta,
                double* y, double* xhat, double* rstd, int rows, int cols,
                double eps);
void layer_norm_backward(const double* dy, const double* xhat,
                         const double* rstd, const double* gamma, double* dx,
                         double* dgamma, double* dbeta, int rows, int cols);
void add(const double* a, const double* b, double* c, int n);
void mul(const double* a, const double* b, double* c, int n);
void affine(const double* x, double scale, double shift, double* y, int n);
void relu(const double* x, double* y, int n);
void relu_backward(const double* x, const double* dy, double* dx, int n);
void sigmoid(const double* x, double* y, int n);
}  // namespace ref

}  // namespace gat::kernels
