#include "gat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gat/kernels.hpp"

namespace gat {

int shape_size(const Shape& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

namespace {

void check_shape(const Shape& shape, const std::vector<double>& values) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_size(shape) != static_cast<int>(values.size())) {
    throw ShapeError("value buffer length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
}

std::vector<double>& ensure_grad(TensorData& d) {
  if (d.grad.empty()) d.grad.assign(d.values.size(), 0.0);
  return d.grad;
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active().enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape, values);
  d_ = std::make_shared<TensorData>();
  d_->shape = std::move(shape);
  d_->values = std::move(values);
  d_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(static_cast<std::size_t>(shape_size(shape)), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(static_cast<std::size_t>(shape_size(shape)), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

double Tensor::value() const {
  if (size() != 1) {
    throw ShapeError("expected a scalar tensor, got shape " + shape_str(shape()));
  }
  return d_->values[0];
}

std::vector<double>& Tensor::grad() { return ensure_grad(*d_); }

const std::vector<double>& Tensor::grad() const { return ensure_grad(*d_); }

Tensor Tensor::detach() const {
  return Tensor(d_->shape, d_->values, false);
}

// ---- tape ----

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::shared_ptr<TensorData> output, std::function<void()> rule) {
  ops_.push_back(Op{std::move(output), std::move(rule)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  // Leaf gradients accumulate across calls; intermediate (op output) grads
  // are per-traversal state and start from zero every time.
  zero_recorded_grads();
  ensure_grad(*loss.node())[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // nothing flowed into this op
    it->rule();
  }
}

void Tape::clear() { ops_.clear(); }

void Tape::zero_recorded_grads() {
  for (auto& op : ops_) op.out->grad.clear();
}

NoGradGuard::NoGradGuard() : prev_(Tape::active().enabled_) {
  Tape::active().enabled_ = false;
}

NoGradGuard::~NoGradGuard() { Tape::active().enabled_ = prev_; }

void backward(const Tensor& loss) { Tape::active().backward(loss); }

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  kernels::matmul_nn(a.data(), b.data(), out.data(), m, k, n, false);
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active().record(on, [an, bn, on, m, k, n] {
      const double* dout = on->grad.data();
      if (an->requires_grad) {
        kernels::matmul_nt(dout, bn->values.data(), ensure_grad(*an).data(), m, n, k, true);
      }
      if (bn->requires_grad) {
        kernels::matmul_tn(an->values.data(), dout, ensure_grad(*bn).data(), m, k, n, true);
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()) + "^T");
  }
  const int m = a.dim(0), q = a.dim(1), p = b.dim(0);
  Tensor out = Tensor::zeros({m, p});
  kernels::matmul_nt(a.data(), b.data(), out.data(), m, q, p, false);
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active().record(on, [an, bn, on, m, q, p] {
      const double* dout = on->grad.data();
      if (an->requires_grad) {
        kernels::matmul_nn(dout, bn->values.data(), ensure_grad(*an).data(), m, p, q, true);
      }
      if (bn->requires_grad) {
        kernels::matmul_tn(dout, an->values.data(), ensure_grad(*bn).data(), m, p, q, true);
      }
    });
  }
  return out;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  kernels::add(a.data(), b.data(), out.data(), a.size());
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active().record(on, [an, bn, on] {
      const std::size_t n = on->grad.size();
      if (an->requires_grad) {
        auto& g = ensure_grad(*an);
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = ensure_grad(*bn);
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out.data()[i] = a.at(i) - b.at(i);
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active().record(on, [an, bn, on] {
      const std::size_t n = on->grad.size();
      if (an->requires_grad) {
        auto& g = ensure_grad(*an);
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = ensure_grad(*bn);
        for (std::size_t i = 0; i < n; ++i) g[i] -= on->grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  kernels::mul(a.data(), b.data(), out.data(), a.size());
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active().record(on, [an, bn, on] {
      const std::size_t n = on->grad.size();
      if (an->requires_grad) {
        auto& g = ensure_grad(*an);
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[i] * bn->values[i];
      }
      if (bn->requires_grad) {
        auto& g = ensure_grad(*bn);
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[i] * an->values[i];
      }
    });
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out.data()[i] = a.at(i) / b.at(i);
  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active().record(on, [an, bn, on] {
      const std::size_t n = on->grad.size();
      if (an->requires_grad) {
        auto& g = ensure_grad(*an);
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[i] / bn->values[i];
      }
      if (bn->requires_grad) {
        auto& g = ensure_grad(*bn);
        for (std::size_t i = 0; i < n; ++i)
          g[i] -= on->grad[i] * an->values[i] / (bn->values[i] * bn->values[i]);
      }
    });
  }
  return out;
}

Tensor affine(const Tensor& x, double scale, double shift) {
  Tensor out = Tensor::zeros(x.shape());
  kernels::affine(x.data(), scale, shift, out.data(), x.size());
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, scale] {
      auto& g = ensure_grad(*xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * scale;
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  if (x.ndim() != 2 || shape_size(bias.shape()) != x.dim(1)) {
    throw DimensionError("add_rowvec shape mismatch: " + shape_str(x.shape()) + " + " +
                         shape_str(bias.shape()));
  }
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out = Tensor::zeros(x.shape());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.data()[static_cast<std::size_t>(r) * cols + c] = x.at(r, c) + bias.at(c);
  if (should_record({&x, &bias})) {
    out.set_requires_grad(true);
    auto xn = x.node(), bn = bias.node(), on = out.node();
    Tape::active().record(on, [xn, bn, on, rows, cols] {
      if (xn->requires_grad) {
        auto& g = ensure_grad(*xn);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        auto& g = ensure_grad(*bn);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) g[c] += on->grad[static_cast<std::size_t>(r) * cols + c];
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kernels::relu(x.data(), out.data(), x.size());
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on] {
      kernels::relu_backward(xn->values.data(), on->grad.data(), ensure_grad(*xn).data(),
                             static_cast<int>(xn->values.size()));
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kernels::sigmoid(x.data(), out.data(), x.size());
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on] {
      auto& g = ensure_grad(*xn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = on->values[i];
        g[i] += on->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

Tensor log(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    if (x.at(i) <= 0.0) {
      throw ParameterError("log requires strictly positive inputs, got " +
                           std::to_string(x.at(i)));
    }
    out.data()[i] = std::log(x.at(i));
  }
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on] {
      auto& g = ensure_grad(*xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] / xn->values[i];
    });
  }
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ParameterError("clamp bounds out of order");
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.data()[i] = std::min(hi, std::max(lo, x.at(i)));
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, lo, hi] {
      auto& g = ensure_grad(*xn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = xn->values[i];
        if (v > lo && v < hi) g[i] += on->grad[i];
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.ndim()) {
    throw DimensionError("softmax axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(x.shape()));
  }
  int outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const int len = x.dim(axis);
  Tensor out = Tensor::zeros(x.shape());
  kernels::softmax(x.data(), out.data(), outer, len, inner);
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, outer, len, inner] {
      kernels::softmax_backward(on->values.data(), on->grad.data(), ensure_grad(*xn).data(),
                                outer, len, inner);
    });
  }
  return out;
}

Tensor masked_softmax_rows(const Tensor& scores, const Tensor* mask) {
  if (scores.ndim() != 2) {
    throw DimensionError("masked_softmax_rows expects 2-d scores, got " +
                         shape_str(scores.shape()));
  }
  if (mask == nullptr) return softmax(scores, 1);
  if (mask->shape() != scores.shape()) {
    throw DimensionError("mask shape " + shape_str(mask->shape()) +
                         " does not match scores " + shape_str(scores.shape()));
  }
  const int rows = scores.dim(0), cols = scores.dim(1);
  Tensor out = Tensor::zeros(scores.shape());
  for (int r = 0; r < rows; ++r) {
    double mx = 0.0;
    bool any = false;
    for (int c = 0; c < cols; ++c) {
      if (mask->at(r, c) == 0.0) continue;
      const double v = scores.at(r, c);
      if (!any || v > mx) mx = v;
      any = true;
    }
    if (!any) {
      throw MaskingError("attention query row " + std::to_string(r) + " has every key masked");
    }
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (mask->at(r, c) == 0.0) continue;
      const double e = std::exp(scores.at(r, c) - mx);
      out.data()[static_cast<std::size_t>(r) * cols + c] = e;
      sum += e;
    }
    for (int c = 0; c < cols; ++c) {
      if (mask->at(r, c) == 0.0) continue;
      out.data()[static_cast<std::size_t>(r) * cols + c] /= sum;
    }
  }
  if (should_record({&scores})) {
    out.set_requires_grad(true);
    auto xn = scores.node(), on = out.node();
    Tape::active().record(on, [xn, on, rows, cols] {
      // zero weights at masked positions kill their terms in the standard
      // softmax backward, so no explicit mask is needed here
      kernels::softmax_backward(on->values.data(), on->grad.data(), ensure_grad(*xn).data(),
                                rows, cols, 1);
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (eps <= 0.0) throw ParameterError("layer_norm eps must be > 0, got " + std::to_string(eps));
  const int cols = x.ndim() == 1 ? x.dim(0) : x.dim(x.ndim() - 1);
  const int rows = x.size() / cols;
  if (shape_size(gamma.shape()) != cols || shape_size(beta.shape()) != cols) {
    throw DimensionError("layer_norm gamma/beta must match the normalized axis: " +
                         shape_str(gamma.shape()) + ", " + shape_str(beta.shape()) +
                         " vs cols " + std::to_string(cols));
  }
  Tensor out = Tensor::zeros(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  kernels::layer_norm(x.data(), gamma.data(), beta.data(), out.data(), xhat->data(),
                      rstd->data(), rows, cols, eps);
  if (should_record({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    Tape::active().record(on, [xn, gn, bn, on, xhat, rstd, rows, cols] {
      std::vector<double> dgamma(cols, 0.0), dbeta(cols, 0.0);
      std::vector<double> dx_scratch;
      double* dx = nullptr;
      if (xn->requires_grad) {
        dx = ensure_grad(*xn).data();
      } else {
        dx_scratch.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        dx = dx_scratch.data();
      }
      kernels::layer_norm_backward(on->grad.data(), xhat->data(), rstd->data(),
                                   gn->values.data(), dx, dgamma.data(), dbeta.data(), rows,
                                   cols);
      if (gn->requires_grad) {
        auto& g = ensure_grad(*gn);
        for (int c = 0; c < cols; ++c) g[c] += dgamma[c];
      }
      if (bn->requires_grad) {
        auto& g = ensure_grad(*bn);
        for (int c = 0; c < cols; ++c) g[c] += dbeta[c];
      }
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.ndim() != 2) {
    throw DimensionError("embedding table must be 2-d, got " + shape_str(table.shape()));
  }
  const int vocab = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab));
    }
  }
  if (ids.empty()) throw LengthError("embedding_lookup requires at least one id");
  const int len = static_cast<int>(ids.size());
  Tensor out = Tensor::zeros({len, d});
  for (int i = 0; i < len; ++i) {
    const double* src = table.data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.data() + static_cast<std::size_t>(i) * d);
  }
  if (should_record({&table})) {
    out.set_requires_grad(true);
    auto tn = table.node(), on = out.node();
    auto ids_copy = ids;
    Tape::active().record(on, [tn, on, ids_copy, d] {
      auto& g = ensure_grad(*tn);
      for (std::size_t i = 0; i < ids_copy.size(); ++i) {
        double* dst = g.data() + static_cast<std::size_t>(ids_copy[i]) * d;
        const double* src = on->grad.data() + i * d;
        for (int c = 0; c < d; ++c) dst[c] += src[c];
      }
    });
  }
  return out;
}

Tensor sparse_categorical_cross_entropy(const Tensor& logits,
                                        const std::vector<int>& targets, int pad_id) {
  if (logits.ndim() != 2 || static_cast<int>(targets.size()) != logits.dim(0)) {
    throw DimensionError("cross entropy expects logits (T x V) with T targets, got " +
                         shape_str(logits.shape()) + " and " + std::to_string(targets.size()) +
                         " targets");
  }
  const int rows = logits.dim(0), vocab = logits.dim(1);
  int live = 0;
  for (int t : targets) {
    if (t == pad_id) continue;
    if (t < 0 || t >= vocab) {
      throw VocabularyError("target id " + std::to_string(t) + " outside vocabulary of size " +
                            std::to_string(vocab));
    }
    ++live;
  }
  if (live == 0) throw DegenerateBatchError("every target position is padding");

  // softmax rows saved for the backward rule
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  kernels::softmax(logits.data(), probs->data(), rows, vocab, 1);
  double total = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (targets[static_cast<std::size_t>(r)] == pad_id) continue;
    total -= std::log((*probs)[static_cast<std::size_t>(r) * vocab +
                              targets[static_cast<std::size_t>(r)]]);
  }
  Tensor out = Tensor::scalar(total / live);
  if (should_record({&logits})) {
    out.set_requires_grad(true);
    auto ln = logits.node(), on = out.node();
    auto tgt = targets;
    Tape::active().record(on, [ln, on, probs, tgt, rows, vocab, pad_id, live] {
      const double upstream = on->grad[0] / live;
      auto& g = ensure_grad(*ln);
      for (int r = 0; r < rows; ++r) {
        if (tgt[static_cast<std::size_t>(r)] == pad_id) continue;
        const std::size_t base = static_cast<std::size_t>(r) * vocab;
        for (int v = 0; v < vocab; ++v) g[base + v] += upstream * (*probs)[base + v];
        g[base + tgt[static_cast<std::size_t>(r)]] -= upstream;
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (int i = 0; i < x.size(); ++i) total += x.at(i);
  Tensor out = Tensor::scalar(total);
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on] {
      auto& g = ensure_grad(*xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  double total = 0.0;
  for (int i = 0; i < x.size(); ++i) total += x.at(i);
  const int n = x.size();
  Tensor out = Tensor::scalar(total / n);
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, n] {
      auto& g = ensure_grad(*xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[0] / n;
    });
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  if (x.ndim() != 2) {
    throw DimensionError("mean_rows expects a 2-d tensor, got " + shape_str(x.shape()));
  }
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out = Tensor::zeros({1, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.data()[c] += x.at(r, c) / rows;
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, rows, cols] {
      auto& g = ensure_grad(*xn);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          g[static_cast<std::size_t>(r) * cols + c] += on->grad[static_cast<std::size_t>(c)] / rows;
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  if (x.ndim() != 2 || start < 0 || len <= 0 || start + len > x.dim(1)) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") invalid for shape " +
                         shape_str(x.shape()));
  }
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out = Tensor::zeros({rows, len});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < len; ++c)
      out.data()[static_cast<std::size_t>(r) * len + c] = x.at(r, start + c);
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, rows, cols, start, len] {
      auto& g = ensure_grad(*xn);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < len; ++c)
          g[static_cast<std::size_t>(r) * cols + start + c] +=
              on->grad[static_cast<std::size_t>(r) * len + c];
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols requires at least one part");
  const int rows = parts[0].dim(0);
  int cols = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.dim(0) != rows) {
      throw DimensionError("concat_cols parts must share row count");
    }
    cols += p.dim(1);
  }
  Tensor out = Tensor::zeros({rows, cols});
  int offset = 0;
  for (const Tensor& p : parts) {
    const int w = p.dim(1);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < w; ++c)
        out.data()[static_cast<std::size_t>(r) * cols + offset + c] = p.at(r, c);
    offset += w;
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (Tape::active().enabled() && any) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorData>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    Tape::active().record(on, [nodes, on, rows, cols] {
      int off = 0;
      for (const auto& pn : nodes) {
        const int w = pn->shape[1];
        if (pn->requires_grad) {
          auto& g = ensure_grad(*pn);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < w; ++c)
              g[static_cast<std::size_t>(r) * w + c] +=
                  on->grad[static_cast<std::size_t>(r) * cols + off + c];
        }
        off += w;
      }
    });
  }
  return out;
}

Tensor concat_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw DegenerateBatchError("concat_scalars on an empty list");
  const int n = static_cast<int>(scalars.size());
  Tensor out = Tensor::zeros({n});
  for (int i = 0; i < n; ++i) out.data()[i] = scalars[static_cast<std::size_t>(i)].value();
  bool any = false;
  for (const Tensor& s : scalars) any = any || s.requires_grad();
  if (Tape::active().enabled() && any) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorData>> nodes;
    nodes.reserve(scalars.size());
    for (const Tensor& s : scalars) nodes.push_back(s.node());
    auto on = out.node();
    Tape::active().record(on, [nodes, on] {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i]->requires_grad) ensure_grad(*nodes[i])[0] += on->grad[i];
      }
    });
  }
  return out;
}

Tensor column_max(const Tensor& x, int col) {
  if (x.ndim() != 2 || col < 0 || col >= x.dim(1)) {
    throw DimensionError("column_max col " + std::to_string(col) + " invalid for shape " +
                         shape_str(x.shape()));
  }
  const int rows = x.dim(0), cols = x.dim(1);
  int best = 0;
  for (int r = 1; r < rows; ++r) {
    if (x.at(r, col) > x.at(best, col)) best = r;
  }
  Tensor out = Tensor::scalar(x.at(best, col));
  if (should_record({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active().record(on, [xn, on, best, cols, col] {
      ensure_grad(*xn)[static_cast<std::size_t>(best) * cols + col] += on->grad[0];
    });
  }
  return out;
}

// ---- optimizer ----

Adam::Adam(std::vector<NamedTensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<std::size_t>(params_[i].tensor.size()), 0.0);
    v_[i].assign(static_cast<std::size_t>(params_[i].tensor.size()), 0.0);
  }
}

void Adam::step() {
  for (const NamedTensor& p : params_) {
    if (!p.tensor.has_grad()) {
      throw OptimizerError("parameter '" + p.name + "' has no gradient");
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].tensor;
    const std::vector<double>& g = t.grad();
    double* w = t.data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g[j];
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      w[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    t.zero_grad();
  }
}

void Adam::zero_grad() {
  for (NamedTensor& p : params_) p.tensor.zero_grad();
}

void Adam::allocate_missing_grads() {
  for (NamedTensor& p : params_) p.tensor.grad();
}

// ---- finite differences ----

FiniteDifferenceReport finite_difference_check(const std::function<Tensor()>& f,
                                               const std::vector<NamedTensor>& params,
                                               double eps) {
  if (eps < 1e-8 || eps > 1e-3) {
    throw ParameterError("finite difference eps must lie in [1e-8, 1e-3], got " +
                         std::to_string(eps));
  }
  {
    NoGradGuard ng;
    const double v1 = f().value();
    const double v2 = f().value();
    if (v1 != v2) {
      throw DeterminismError("two evaluations at the same parameters differ: " +
                             std::to_string(v1) + " vs " + std::to_string(v2));
    }
  }

  // analytic gradients on a fresh tape
  Tape::active().clear();
  for (const NamedTensor& p : params) const_cast<Tensor&>(p.tensor).zero_grad();
  Tensor loss = f();
  Tape::active().backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const NamedTensor& p : params) {
    if (p.tensor.has_grad()) {
      analytic.push_back(p.tensor.grad());
    } else {
      analytic.emplace_back(static_cast<std::size_t>(p.tensor.size()), 0.0);
    }
  }
  Tape::active().clear();
  for (const NamedTensor& p : params) const_cast<Tensor&>(p.tensor).zero_grad();

  FiniteDifferenceReport report;
  NoGradGuard ng;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].tensor;
    for (int j = 0; j < t.size(); ++j) {
      const double orig = t.data()[j];
      t.data()[j] = orig + eps;
      const double fp = f().value();
      t.data()[j] = orig - eps;
      const double fm = f().value();
      t.data()[j] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double ana = analytic[pi][static_cast<std::size_t>(j)];
      const double denom = std::max({std::fabs(numeric), std::fabs(ana), 1e-8});
      const double rel = std::fabs(numeric - ana) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].name;
        report.worst_index = j;
      }
    }
  }
  return report;
}

// ---- init ----

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::next_index(std::uint64_t bound) {
  // modulo bias is irrelevant at these scales
  return engine_() % bound;
}

Tensor xavier_uniform(Shape shape, Rng& rng, bool requires_grad) {
  const int fan_in = shape.size() >= 2 ? shape[0] : shape_size(shape);
  const int fan_out = shape.size() >= 2 ? shape[1] : shape_size(shape);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(shape, requires_grad);
  for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

}  // namespace gat
