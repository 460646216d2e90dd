#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gat/conditions.hpp"
#include "gat/data.hpp"
#include "gat/tensor.hpp"
#include "gat/transformer.hpp"

namespace gat {

// Expected embedding of token distributions: matmul(distributions, table)
// with gradients into both. Rows must sum to 1 within 1e-6.
Tensor soft_embed(const Tensor& distributions, const Tensor& embedding_table);

// Memory-augmented encoder with a mean-pool + affine + sigmoid readout.
// Real sequences enter via embedding lookup, generator output via
// soft_embed; both get positional encodings.
class Discriminator {
 public:
  Discriminator(ModelConfig config, std::uint64_t seed);

  Tensor score_ids(const std::vector<int>& token_ids,
                   const std::vector<int>& memory_ids) const;
  Tensor score_distributions(const Tensor& distributions,
                             const std::vector<int>& memory_ids) const;

  const ModelConfig& config() const { return config_; }
  std::vector<NamedTensor> parameters() const;
  long parameter_count() const;
  static long expected_parameter_count(const ModelConfig& config);

  Tensor head_weight() { return head_w_; }
  Tensor head_bias() { return head_b_; }

 private:
  Tensor score_from_embedded(const Tensor& x0, const std::vector<int>& memory_ids) const;

  ModelConfig config_;
  Tensor embedding_;
  Tensor positions_;
  std::vector<EncoderBlock> blocks_;
  Tensor head_w_, head_b_;
};

void apply_checkpoint(Discriminator& model, const Checkpoint& checkpoint);

constexpr double kProbabilityClamp = 1e-7;

// -mean(log D(real)) - mean(log(1 - D(fake))), probabilities clamped to
// [1e-7, 1 - 1e-7]. Minimizing this maximizes the value function for D.
Tensor discriminator_loss(const std::vector<Tensor>& real_scores,
                          const std::vector<Tensor>& fake_scores);

// Generator side. Non-saturating form -mean(log D(fake)) by default; the
// literal value-function form mean(log(1 - D(fake))) sits behind the flag.
Tensor generator_adversarial_loss(const std::vector<Tensor>& fake_scores,
                                  bool non_saturating = true);

// Weighted sum ordered [standard, conditions..., adversarial]; weight count
// must equal 2 + condition count. Zero-weight terms are skipped so the
// degenerate case reduces to the standard loss exactly.
Tensor compose_generator_loss(const Tensor& standard, const std::vector<Tensor>& conditions,
                              const Tensor& adversarial, const std::vector<double>& weights);

struct GatOptions {
  AdamConfig generator_opt;
  AdamConfig discriminator_opt;
  double standard_weight = 1.0;
  std::vector<double> condition_weights;  // parallel to the condition list
  double adversarial_weight = 1.0;
  bool non_saturating = true;
  // When false the discriminator is left untouched (pure seq2seq baseline).
  bool train_discriminator = true;
};

// One training batch as the discriminator sees it: real target sequences
// against the generator's teacher-forced distributions over the same
// inputs.
struct GanBatch {
  struct RealItem {
    std::vector<int> target_ids;  // tokens then EOS, no BOS
    std::vector<int> memory_ids;
  };
  struct FakeItem {
    Tensor distributions;  // [T x V], rows sum to 1
    std::vector<int> memory_ids;
  };
  std::vector<RealItem> real;
  std::vector<FakeItem> fake;
};

struct StepMetrics {
  double standard_loss = 0.0;
  std::vector<double> condition_losses;
  double adversarial_loss = 0.0;
  double composed_loss = 0.0;
  double discriminator_loss = 0.0;
  double discriminator_accuracy = 0.0;
  double token_accuracy = 0.0;
};

// Generator/discriminator pair with optimizer state and pluggable
// generator condition losses.
class GatModel {
 public:
  GatModel(ModelConfig config, GatOptions options, std::vector<ConditionLoss> conditions,
           std::uint64_t seed);

  MemoryAugmentedTransformer& generator() { return generator_; }
  const MemoryAugmentedTransformer& generator() const { return generator_; }
  Discriminator& discriminator() { return discriminator_; }
  Adam& generator_optimizer() { return gen_opt_; }
  Adam& discriminator_optimizer() { return disc_opt_; }
  const GatOptions& options() const { return options_; }
  const std::vector<ConditionLoss>& conditions() const { return conditions_; }

 private:
  MemoryAugmentedTransformer generator_;
  Discriminator discriminator_;
  Adam gen_opt_;
  Adam disc_opt_;
  GatOptions options_;
  std::vector<ConditionLoss> conditions_;
};

// One zero-sum step: teacher-forced generator forward, discriminator update
// on real vs fake, then generator update on the composed loss against the
// just-updated discriminator.
StepMetrics gat_train_step(GatModel& model, const std::vector<EncodedTurn>& batch);

// Teacher-forced evaluation (no parameter updates): mean standard loss and
// token accuracy over the given turns.
struct EvalMetrics {
  double standard_loss = 0.0;
  double token_accuracy = 0.0;
};
EvalMetrics evaluate_teacher_forced(const MemoryAugmentedTransformer& model,
                                    const std::vector<EncodedTurn>& turns);

}  // namespace gat
