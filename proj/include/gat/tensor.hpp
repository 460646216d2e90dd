#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gat/errors.hpp"

namespace gat {

using Shape = std::vector<int>;

int shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

// Dense n-dimensional array of 64-bit floats with optional gradient
// tracking. Cheap to copy: a Tensor is a shared handle onto its buffer,
// which is how the tape references operands after the forward pass.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  int ndim() const { return static_cast<int>(d_->shape.size()); }
  int dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(d_->values.size()); }

  double* data() { return d_->values.data(); }
  const double* data() const { return d_->values.data(); }
  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }

  // Scalar accessor; throws ShapeError unless the tensor holds one value.
  double value() const;
  double at(int i) const { return d_->values[static_cast<std::size_t>(i)]; }
  double at(int r, int c) const {
    return d_->values[static_cast<std::size_t>(r) * dim(1) + c];
  }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }

  bool has_grad() const { return !d_->grad.empty(); }
  // Gradient buffer, allocated to zeros on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad() { d_->grad.clear(); }

  // Value copy cut loose from the graph (requires_grad = false).
  Tensor detach() const;

  std::shared_ptr<TensorData> node() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Reverse-mode tape: an ordered record of primitive ops, each holding its
// output handle and a local gradient rule. Thread-local, so independent
// model instances can train on distinct threads without shared state.
class Tape {
 public:
  static Tape& active();

  void record(std::shared_ptr<TensorData> output, std::function<void()> rule);
  // Seeds d(loss)/d(loss) = 1 and replays every recorded rule once, in
  // reverse order. Gradients accumulate; they are never overwritten here.
  void backward(const Tensor& loss);
  void clear();
  // Drops the gradient buffers of all recorded op outputs (leaf parameters
  // keep theirs). Used between the discriminator and generator phases of a
  // training step so stale output grads cannot re-trigger rules.
  void zero_recorded_grads();
  std::size_t size() const { return ops_.size(); }
  bool enabled() const { return enabled_; }

 private:
  struct Op {
    std::shared_ptr<TensorData> out;
    std::function<void()> rule;
  };
  std::vector<Op> ops_;
  bool enabled_ = true;
  friend class NoGradGuard;
};

// Disables tape recording for its scope (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

void backward(const Tensor& loss);

// ---- primitive ops ----
// Every op validates shapes, computes forward with the kernels, and when
// recording is enabled and an input requires grad, pushes its gradient
// rule onto the active tape.

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T; the natural shape for attention scores.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
// y = x * scale + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift);
// x[R x C] + bias[C] broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
// Clamp to [lo, hi]; gradient passes only strictly inside the interval.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor softmax(const Tensor& x, int axis);
// Row softmax over scores[Tq x Tk] with an optional 0/1 keep-mask of the
// same shape. Masked positions get exactly zero weight; a fully masked row
// raises MaskingError.
Tensor masked_softmax_rows(const Tensor& scores, const Tensor* mask);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
// Mean over non-pad positions of -log softmax(logits)[t, target[t]].
Tensor sparse_categorical_cross_entropy(const Tensor& logits,
                                        const std::vector<int>& targets,
                                        int pad_id);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Column means: [R x C] -> [1 x C].
Tensor mean_rows(const Tensor& x);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);
// Packs scalar tensors into one vector [n].
Tensor concat_scalars(const std::vector<Tensor>& scalars);
// Maximum over rows of one column -> scalar; gradient goes to the first
// argmax position.
Tensor column_max(const Tensor& x, int col);

// ---- optimizer ----

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(std::vector<NamedTensor> params, AdamConfig config = {});

  // Bias-corrected Adam update over all registered parameters, then clears
  // their gradients. Throws OptimizerError naming any parameter whose
  // gradient buffer was never populated.
  void step();
  void zero_grad();
  // Gives every parameter a zero gradient buffer if it has none. Trainers
  // call this after backward so parameters unreachable from the loss (e.g.
  // memory weights under empty memory) read as zero-gradient.
  void allocate_missing_grads();
  long step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<NamedTensor>& params() const { return params_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  long step_ = 0;
};

// ---- verification ----

struct FiniteDifferenceReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
};

// Central-difference check of analytic gradients for a deterministic
// scalar-valued forward function. eps must lie in [1e-8, 1e-3]; relative
// errors use denominator max(|analytic|, |numeric|, 1e-8).
FiniteDifferenceReport finite_difference_check(
    const std::function<Tensor()>& f, const std::vector<NamedTensor>& params,
    double eps);

// ---- init ----

// Deterministic RNG wrapper; the uniform transform avoids
// implementation-defined distribution code paths.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  std::uint64_t next_index(std::uint64_t bound);  // [0, bound)
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

Tensor xavier_uniform(Shape shape, Rng& rng, bool requires_grad = true);

}  // namespace gat
