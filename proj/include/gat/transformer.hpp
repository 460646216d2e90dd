#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gat/tensor.hpp"

namespace gat {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 256;
  int num_heads = 8;
  int num_layers = 2;
  int max_seq_len = 64;
  int max_memory_len = 64;
  int feedforward_dim = 0;  // 0 means 4 * d_model
  int pad_id = 0;
  int bos_id = 1;
  int eos_id = 2;
  bool separate_memory_embedding = false;
  // When false the memory branch does not exist at all: blocks carry no
  // memory-attention weights and never touch memory input. This is the
  // comparison model for the empty-memory equivalence check.
  bool use_memory = true;

  int ffn_dim() const { return feedforward_dim > 0 ? feedforward_dim : 4 * d_model; }
  void validate() const;  // ConfigurationError naming the offending field
};

constexpr double kLayerNormEps = 1e-5;

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(int d_model, int num_heads, Rng& rng);

  // Scaled dot-product attention per head over already-projected Q/K/V,
  // heads concatenated and projected by wo. mask, when given, is a 0/1
  // keep-mask of shape [Tq x Tk]. attn_out receives one [Tq x Tk] weight
  // matrix per head when non-null.
  Tensor forward(const Tensor& query_seq, const Tensor& key_seq, const Tensor& value_seq,
                 const Tensor* mask = nullptr, std::vector<Tensor>* attn_out = nullptr) const;

  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;

  // public so tests can install identity projections
  Tensor wq, wk, wv, wo;
  int heads = 0;
  int head_dim = 0;
};

struct FeedForward {
  FeedForward() = default;
  FeedForward(int d_model, int hidden, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  Tensor w1, b1, w2, b2;
};

struct LayerNormParams {
  LayerNormParams() = default;
  explicit LayerNormParams(int d_model);
  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  Tensor gamma, beta;
};

// Encoder block: out = Norm(x + SelfAttn(x,x,x) + MemAttn(x, mem, mem)),
// then a feedforward sublayer with residual and normalization. With no
// memory the memory term is skipped, which adds exactly nothing.
struct EncoderBlock {
  EncoderBlock() = default;
  EncoderBlock(const ModelConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor* memory) const;
  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  MultiHeadAttention self_attn, memory_attn;
  LayerNormParams ln_attn, ln_ff;
  FeedForward ff;
  bool has_memory = false;
};

// Decoder block: masked self-attention, cross-attention to the encoder
// output and memory attention summed into one residual, then feedforward.
struct DecoderBlock {
  DecoderBlock() = default;
  DecoderBlock(const ModelConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& y, const Tensor& encoder_out, const Tensor* memory,
                 const Tensor& causal_mask) const;
  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
  MultiHeadAttention self_attn, cross_attn, memory_attn;
  LayerNormParams ln_attn, ln_ff;
  FeedForward ff;
  bool has_memory = false;
};

Tensor sinusoidal_positions(int max_len, int d_model);
Tensor causal_mask(int len);

struct TeacherForced {
  Tensor logits;            // [T x V]
  std::vector<int> labels;  // length T
};

// Seq-to-seq Transformer whose encoder and decoder blocks each carry a
// second attention stream over an external data memory.
class MemoryAugmentedTransformer {
 public:
  MemoryAugmentedTransformer(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Tensor encode(const std::vector<int>& input_ids, const std::vector<int>& memory_ids) const;
  Tensor decode(const std::vector<int>& target_prefix_ids, const Tensor& encoder_out,
                const std::vector<int>& memory_ids) const;
  // Greedy decoding from BOS until EOS or the length cap; BOS/EOS excluded
  // from the returned sequence.
  std::vector<int> generate(const std::vector<int>& input_ids,
                            const std::vector<int>& memory_ids, int max_len) const;
  // target must carry BOS ... EOS; logits predict target[1..] from
  // target[..n-2].
  TeacherForced teacher_forced(const std::vector<int>& input_ids,
                               const std::vector<int>& memory_ids,
                               const std::vector<int>& target_with_bos_eos) const;

  std::vector<NamedTensor> parameters() const;
  long parameter_count() const;
  static long expected_parameter_count(const ModelConfig& config);

  const Tensor& embedding() const { return embedding_; }
  const Tensor& memory_embedding() const {
    return config_.separate_memory_embedding ? memory_embedding_ : embedding_;
  }
  // Token embeddings plus (optionally) sinusoidal positions.
  Tensor embed_tokens(const std::vector<int>& ids, bool with_positions) const;
  // Memory embeddings carry no positional encodings: the memory is an
  // unordered bag of slot items. Returns an undefined tensor when empty.
  Tensor embed_memory(const std::vector<int>& memory_ids) const;

  std::vector<EncoderBlock>& encoder_blocks() { return encoder_; }
  std::vector<DecoderBlock>& decoder_blocks() { return decoder_; }

 private:
  ModelConfig config_;
  Tensor embedding_;         // [V x d]
  Tensor memory_embedding_;  // defined only when separate tables requested
  Tensor positions_;         // [max_seq_len x d], constant
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  Tensor out_w_, out_b_;
};

// ---- checkpoint format ----
// Single self-describing binary file: magic, format-version integer, a
// JSON header with the config fields (plus the vocabulary token list), and
// the named parameter tensors as (name, shape, row-major f64 values).

struct Checkpoint {
  int format_version = 1;
  ModelConfig config;
  std::vector<std::string> vocab_tokens;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into the model; every parameter must be
// present with a shape matching the model built from the checkpoint's own
// config, else CompatibilityError.
void apply_checkpoint(MemoryAugmentedTransformer& model, const Checkpoint& checkpoint);

// Name-matched tensor copy with shape/completeness validation; shared by
// every checkpointable model.
void copy_checkpoint_tensors(std::vector<NamedTensor> params, const Checkpoint& checkpoint);

}  // namespace gat
