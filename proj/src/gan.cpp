#include "gat/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gat {

Tensor soft_embed(const Tensor& distributions, const Tensor& embedding_table) {
  if (distributions.ndim() != 2 || embedding_table.ndim() != 2 ||
      distributions.dim(1) != embedding_table.dim(0)) {
    throw DimensionError("soft_embed shape mismatch: " + shape_str(distributions.shape()) +
                         " vs table " + shape_str(embedding_table.shape()));
  }
  for (int r = 0; r < distributions.dim(0); ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < distributions.dim(1); ++c) row_sum += distributions.at(r, c);
    if (std::fabs(row_sum - 1.0) > 1e-6) {
      throw DistributionError("distribution row " + std::to_string(r) + " sums to " +
                              std::to_string(row_sum));
    }
  }
  return matmul(distributions, embedding_table);
}

// ---- discriminator ----

Discriminator::Discriminator(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  embedding_ = xavier_uniform({config_.vocab_size, config_.d_model}, rng);
  positions_ = sinusoidal_positions(config_.max_seq_len, config_.d_model);
  blocks_.reserve(static_cast<std::size_t>(config_.num_layers));
  for (int i = 0; i < config_.num_layers; ++i) blocks_.emplace_back(config_, rng);
  head_w_ = xavier_uniform({config_.d_model, 1}, rng);
  head_b_ = Tensor::zeros({1}, true);
}

Tensor Discriminator::score_from_embedded(const Tensor& x0,
                                          const std::vector<int>& memory_ids) const {
  if (static_cast<int>(memory_ids.size()) > config_.max_memory_len) {
    throw LengthError("memory length " + std::to_string(memory_ids.size()) +
                      " exceeds max_memory_len " + std::to_string(config_.max_memory_len));
  }
  const int len = x0.dim(0);
  Tensor pos = Tensor::zeros({len, config_.d_model});
  std::memcpy(pos.data(), positions_.data(),
              static_cast<std::size_t>(len) * config_.d_model * sizeof(double));
  Tensor x = add(x0, pos);
  Tensor memory;
  if (config_.use_memory && !memory_ids.empty()) {
    memory = embedding_lookup(embedding_, memory_ids);
  }
  for (const EncoderBlock& block : blocks_) {
    x = block.forward(x, memory.defined() ? &memory : nullptr);
  }
  Tensor pooled = mean_rows(x);
  Tensor logit = add_rowvec(matmul(pooled, head_w_), head_b_);
  return sigmoid(logit);
}

Tensor Discriminator::score_ids(const std::vector<int>& token_ids,
                                const std::vector<int>& memory_ids) const {
  if (token_ids.empty()) throw LengthError("discriminator requires a non-empty sequence");
  if (static_cast<int>(token_ids.size()) > config_.max_seq_len) {
    throw LengthError("sequence length " + std::to_string(token_ids.size()) +
                      " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  return score_from_embedded(embedding_lookup(embedding_, token_ids), memory_ids);
}

Tensor Discriminator::score_distributions(const Tensor& distributions,
                                          const std::vector<int>& memory_ids) const {
  if (distributions.dim(0) == 0) {
    throw LengthError("discriminator requires a non-empty sequence");
  }
  if (distributions.dim(0) > config_.max_seq_len) {
    throw LengthError("sequence length " + std::to_string(distributions.dim(0)) +
                      " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  return score_from_embedded(soft_embed(distributions, embedding_), memory_ids);
}

std::vector<NamedTensor> Discriminator::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", embedding_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_parameters("enc" + std::to_string(i), out);
  }
  out.push_back({"head.w", head_w_});
  out.push_back({"head.b", head_b_});
  return out;
}

long Discriminator::parameter_count() const {
  long n = 0;
  for (const NamedTensor& p : parameters()) n += p.tensor.size();
  return n;
}

long Discriminator::expected_parameter_count(const ModelConfig& config) {
  const long d = config.d_model;
  const long f = config.ffn_dim();
  const long attn = 4 * d * d;
  const long enc_block = attn + (config.use_memory ? attn : 0) + (d * f + f + f * d + d) + 4 * d;
  return config.vocab_size * d + config.num_layers * enc_block + d + 1;
}

void apply_checkpoint(Discriminator& model, const Checkpoint& checkpoint) {
  copy_checkpoint_tensors(model.parameters(), checkpoint);
}

// ---- losses ----

namespace {

Tensor clamped_probabilities(const std::vector<Tensor>& scores) {
  return clamp(concat_scalars(scores), kProbabilityClamp, 1.0 - kProbabilityClamp);
}

}  // namespace

Tensor discriminator_loss(const std::vector<Tensor>& real_scores,
                          const std::vector<Tensor>& fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) {
    throw DegenerateBatchError("discriminator loss needs real and fake scores");
  }
  Tensor real_term = affine(mean(log(clamped_probabilities(real_scores))), -1.0, 0.0);
  Tensor fake = clamped_probabilities(fake_scores);
  Tensor fake_term = affine(mean(log(affine(fake, -1.0, 1.0))), -1.0, 0.0);
  return add(real_term, fake_term);
}

Tensor generator_adversarial_loss(const std::vector<Tensor>& fake_scores, bool non_saturating) {
  if (fake_scores.empty()) {
    throw DegenerateBatchError("generator adversarial loss needs fake scores");
  }
  Tensor fake = clamped_probabilities(fake_scores);
  if (non_saturating) {
    return affine(mean(log(fake)), -1.0, 0.0);
  }
  // literal value-function form: G minimizes E[log(1 - D(fake))]
  return mean(log(affine(fake, -1.0, 1.0)));
}

Tensor compose_generator_loss(const Tensor& standard, const std::vector<Tensor>& conditions,
                              const Tensor& adversarial, const std::vector<double>& weights) {
  if (weights.size() != conditions.size() + 2) {
    throw ConfigurationError("expected " + std::to_string(conditions.size() + 2) +
                             " loss weights, got " + std::to_string(weights.size()));
  }
  std::vector<std::pair<const Tensor*, double>> terms;
  terms.emplace_back(&standard, weights.front());
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    terms.emplace_back(&conditions[i], weights[i + 1]);
  }
  terms.emplace_back(&adversarial, weights.back());

  Tensor composed;
  for (const auto& [tensor, weight] : terms) {
    if (weight == 0.0) continue;
    Tensor piece = weight == 1.0 ? *tensor : affine(*tensor, weight, 0.0);
    composed = composed.defined() ? add(composed, piece) : piece;
  }
  return composed.defined() ? composed : Tensor::scalar(0.0);
}

// ---- model ----

GatModel::GatModel(ModelConfig config, GatOptions options, std::vector<ConditionLoss> conditions,
                   std::uint64_t seed)
    : generator_(config, seed),
      discriminator_(config, seed + 1),
      gen_opt_(generator_.parameters(), options.generator_opt),
      disc_opt_(discriminator_.parameters(), options.discriminator_opt),
      options_(std::move(options)),
      conditions_(std::move(conditions)) {
  if (options_.condition_weights.empty()) {
    options_.condition_weights.assign(conditions_.size(), 1.0);
  }
  if (options_.condition_weights.size() != conditions_.size()) {
    throw ConfigurationError("condition weight count " +
                             std::to_string(options_.condition_weights.size()) +
                             " does not match condition count " +
                             std::to_string(conditions_.size()));
  }
}

// ---- training step ----

namespace {

std::vector<int> greedy_ids(const Tensor& distributions) {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(distributions.dim(0)));
  for (int r = 0; r < distributions.dim(0); ++r) {
    int best = 0;
    for (int c = 1; c < distributions.dim(1); ++c) {
      if (distributions.at(r, c) > distributions.at(r, best)) best = c;
    }
    ids.push_back(best);
  }
  return ids;
}

}  // namespace

StepMetrics gat_train_step(GatModel& model, const std::vector<EncodedTurn>& batch) {
  if (batch.empty()) throw DegenerateBatchError("training step on an empty batch");
  const GatOptions& opt = model.options();
  const ModelConfig& cfg = model.generator().config();
  Tape::active().clear();

  StepMetrics metrics;
  metrics.condition_losses.assign(model.conditions().size(), 0.0);

  // teacher-forced generator forward for the whole batch
  std::vector<Tensor> ce_losses;
  std::vector<Tensor> distributions;
  std::vector<std::vector<int>> labels;
  int correct_tokens = 0, total_tokens = 0;
  for (const EncodedTurn& turn : batch) {
    TeacherForced tf =
        model.generator().teacher_forced(turn.input_ids, turn.memory_ids, turn.target_ids);
    ce_losses.push_back(
        sparse_categorical_cross_entropy(tf.logits, tf.labels, cfg.pad_id));
    distributions.push_back(softmax(tf.logits, 1));
    labels.push_back(tf.labels);
    const std::vector<int> predicted = greedy_ids(tf.logits);
    for (std::size_t t = 0; t < tf.labels.size(); ++t) {
      ++total_tokens;
      if (predicted[t] == tf.labels[t]) ++correct_tokens;
    }
  }
  Tensor standard = mean(concat_scalars(ce_losses));
  metrics.standard_loss = standard.value();
  metrics.token_accuracy = total_tokens > 0
                               ? static_cast<double>(correct_tokens) / total_tokens
                               : 0.0;

  // phase 1: discriminator on real targets vs detached fake distributions
  GanBatch gan_batch;
  if (opt.train_discriminator) {
    std::vector<Tensor> real_scores, fake_scores;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      gan_batch.real.push_back({labels[i], batch[i].memory_ids});
      gan_batch.fake.push_back({distributions[i].detach(), batch[i].memory_ids});
      real_scores.push_back(
          model.discriminator().score_ids(gan_batch.real[i].target_ids, batch[i].memory_ids));
      fake_scores.push_back(model.discriminator().score_distributions(
          gan_batch.fake[i].distributions, batch[i].memory_ids));
    }
    Tensor d_loss = discriminator_loss(real_scores, fake_scores);
    metrics.discriminator_loss = d_loss.value();
    int correct = 0;
    for (const Tensor& s : real_scores) correct += s.value() > 0.5 ? 1 : 0;
    for (const Tensor& s : fake_scores) correct += s.value() < 0.5 ? 1 : 0;
    metrics.discriminator_accuracy =
        static_cast<double>(correct) / static_cast<double>(2 * batch.size());

    Tape::active().backward(d_loss);
    model.discriminator_optimizer().allocate_missing_grads();
    model.discriminator_optimizer().step();
  }

  // phase 2: generator against the just-updated discriminator
  Tensor adversarial = Tensor::scalar(0.0);
  if (opt.adversarial_weight != 0.0) {
    std::vector<Tensor> fake_scores;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      fake_scores.push_back(
          model.discriminator().score_distributions(distributions[i], batch[i].memory_ids));
    }
    adversarial = generator_adversarial_loss(fake_scores, opt.non_saturating);
  }
  metrics.adversarial_loss = adversarial.value();

  std::vector<Tensor> condition_terms;
  for (std::size_t c = 0; c < model.conditions().size(); ++c) {
    const ConditionLoss& condition = model.conditions()[c];
    std::vector<Tensor> per_turn;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (condition.soft) {
        per_turn.push_back(condition.soft(distributions[i], batch[i].memory_ids));
      } else {
        per_turn.push_back(Tensor::scalar(
            condition.hard(greedy_ids(distributions[i]), batch[i].memory_ids)));
      }
    }
    Tensor term = mean(concat_scalars(per_turn));
    metrics.condition_losses[c] = term.value();
    condition_terms.push_back(term);
  }

  std::vector<double> weights;
  weights.push_back(opt.standard_weight);
  for (double w : opt.condition_weights) weights.push_back(w);
  weights.push_back(opt.adversarial_weight);
  Tensor composed = compose_generator_loss(standard, condition_terms, adversarial, weights);
  metrics.composed_loss = composed.value();

  Tape::active().backward(composed);
  model.generator_optimizer().allocate_missing_grads();
  model.generator_optimizer().step();
  // the generator's adversarial term routes gradients through the
  // discriminator as well; those must not leak into its next update
  model.discriminator_optimizer().zero_grad();
  Tape::active().clear();
  return metrics;
}

EvalMetrics evaluate_teacher_forced(const MemoryAugmentedTransformer& model,
                                    const std::vector<EncodedTurn>& turns) {
  if (turns.empty()) throw DegenerateBatchError("evaluation on an empty turn list");
  NoGradGuard no_grad;
  EvalMetrics out;
  int correct = 0, total = 0;
  double loss_sum = 0.0;
  for (const EncodedTurn& turn : turns) {
    TeacherForced tf = model.teacher_forced(turn.input_ids, turn.memory_ids, turn.target_ids);
    loss_sum += sparse_categorical_cross_entropy(tf.logits, tf.labels, model.config().pad_id)
                    .value();
    const std::vector<int> predicted = greedy_ids(tf.logits);
    for (std::size_t t = 0; t < tf.labels.size(); ++t) {
      ++total;
      if (predicted[t] == tf.labels[t]) ++correct;
    }
  }
  out.standard_loss = loss_sum / static_cast<double>(turns.size());
  out.token_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  return out;
}

}  // namespace gat
