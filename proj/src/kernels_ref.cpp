#include "gat/kernels.hpp"

#include <cmath>

namespace gat::kernels::ref {

void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? crow[j] : 0.0;
      for (int t = 0; t < k; ++t) acc += arow[t] * b[static_cast<std::size_t>(t) * n + j];
      crow[j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int q,
               int p, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * q;
    double* crow = c + static_cast<std::size_t>(i) * p;
    for (int j = 0; j < p; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * q;
      double acc = accumulate ? crow[j] : 0.0;
      for (int t = 0; t < q; ++t) acc += arow[t] * brow[t];
      crow[j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  for (int i = 0; i < k; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? crow[j] : 0.0;
      for (int t = 0; t < m; ++t)
        acc += a[static_cast<std::size_t>(t) * k + i] * b[static_cast<std::size_t>(t) * n + j];
      crow[j] = acc;
    }
  }
}

void softmax(const double* x, double* y, int outer, int len, int inner) {
  for (int o = 0; o < outer; ++o) {
    for (int i = 0; i < inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(o) * len * inner + i;
      double mx = x[base];
      for (int j = 1; j < len; ++j) {
        const double v = x[base + static_cast<std::size_t>(j) * inner];
        if (v > mx) mx = v;
      }
      double sum = 0.0;
      for (int j = 0; j < len; ++j) {
        const double e = std::exp(x[base + static_cast<std::size_t>(j) * inner] - mx);
        y[base + static_cast<std::size_t>(j) * inner] = e;
        sum += e;
      }
      for (int j = 0; j < len; ++j) y[base + static_cast<std::size_t>(j) * inner] /= sum;
    }
  }
}

void softmax_backward(const double* y, const double* dy, double* dx,
                      int outer, int len, int inner) {
  for (int o = 0; o < outer; ++o) {
    for (int i = 0; i < inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(o) * len * inner + i;
      double dot = 0.0;
      for (int j = 0; j < len; ++j) {
        const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
        dot += dy[idx] * y[idx];
      }
      for (int j = 0; j < len; ++j) {
        const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
        dx[idx] += y[idx] * (dy[idx] - dot);
      }
    }
  }
}

void layer_norm(const double* x, const double* gamma, const double* beta,
                double* y, double* xhat, double* rstd, int rows, int cols,
                double eps) {
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += x[base + c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = x[base + c] - mean;
      var += d * d;
    }
    var /= cols;
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (int c = 0; c < cols; ++c) {
      const double xh = (x[base + c] - mean) * rs;
      xhat[base + c] = xh;
      y[base + c] = xh * gamma[c] + beta[c];
    }
  }
}

void layer_norm_backward(const double* dy, const double* xhat,
                         const double* rstd, const double* gamma, double* dx,
                         double* dgamma, double* dbeta, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      dgamma[c] += dy[base + c] * xhat[base + c];
      dbeta[c] += dy[base + c];
    }
  }
  for (int r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * cols;
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double dxh = dy[base + c] * gamma[c];
      mean_dxhat += dxh;
      mean_dxhat_xhat += dxh * xhat[base + c];
    }
    mean_dxhat /= cols;
    mean_dxhat_xhat /= cols;
    for (int c = 0; c < cols; ++c) {
      const double dxh = dy[base + c] * gamma[c];
      dx[base + c] += rstd[r] * (dxh - mean_dxhat - xhat[base + c] * mean_dxhat_xhat);
    }
  }
}

void add(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void affine(const double* x, double scale, double shift, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = x[i] * scale + shift;
}

void relu(const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx, int n) {
  for (int i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

void sigmoid(const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

}  // namespace gat::kernels::ref
