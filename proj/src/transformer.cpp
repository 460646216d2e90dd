#include "gat/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gat {

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigurationError("model config field '" + field + "' " + why);
  };
  if (vocab_size <= 0) fail("vocab_size", "must be positive");
  if (d_model <= 0) fail("d_model", "must be positive");
  if (num_heads <= 0) fail("num_heads", "must be positive");
  if (d_model % num_heads != 0) fail("num_heads", "must divide d_model");
  if (num_layers <= 0) fail("num_layers", "must be positive");
  if (max_seq_len < 2) fail("max_seq_len", "must be at least 2");
  if (max_memory_len < 0) fail("max_memory_len", "must be nonnegative");
  if (feedforward_dim < 0) fail("feedforward_dim", "must be nonnegative");
  for (int id : {pad_id, bos_id, eos_id}) {
    if (id < 0 || id >= vocab_size) fail("pad/bos/eos", "token ids must lie in the vocabulary");
  }
  if (pad_id == bos_id || pad_id == eos_id || bos_id == eos_id) {
    fail("pad/bos/eos", "token ids must be pairwise distinct");
  }
}

// ---- attention ----

MultiHeadAttention::MultiHeadAttention(int d_model, int num_heads, Rng& rng)
    : wq(xavier_uniform({d_model, d_model}, rng)),
      wk(xavier_uniform({d_model, d_model}, rng)),
      wv(xavier_uniform({d_model, d_model}, rng)),
      wo(xavier_uniform({d_model, d_model}, rng)),
      heads(num_heads),
      head_dim(d_model / num_heads) {}

Tensor MultiHeadAttention::forward(const Tensor& query_seq, const Tensor& key_seq,
                                   const Tensor& value_seq, const Tensor* mask,
                                   std::vector<Tensor>* attn_out) const {
  Tensor q = matmul(query_seq, wq);
  Tensor k = matmul(key_seq, wk);
  Tensor v = matmul(value_seq, wv);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * head_dim, head_dim);
    Tensor kh = slice_cols(k, h * head_dim, head_dim);
    Tensor vh = slice_cols(v, h * head_dim, head_dim);
    Tensor scores = affine(matmul_nt(qh, kh), scale, 0.0);
    Tensor weights = masked_softmax_rows(scores, mask);
    if (attn_out != nullptr) attn_out->push_back(weights);
    head_outputs.push_back(matmul(weights, vh));
  }
  Tensor merged = heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
  return matmul(merged, wo);
}

void MultiHeadAttention::collect_parameters(const std::string& prefix,
                                            std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".wq", wq});
  out.push_back({prefix + ".wk", wk});
  out.push_back({prefix + ".wv", wv});
  out.push_back({prefix + ".wo", wo});
}

// ---- feedforward / norm ----

FeedForward::FeedForward(int d_model, int hidden, Rng& rng)
    : w1(xavier_uniform({d_model, hidden}, rng)),
      b1(Tensor::zeros({hidden}, true)),
      w2(xavier_uniform({hidden, d_model}, rng)),
      b2(Tensor::zeros({d_model}, true)) {}

Tensor FeedForward::forward(const Tensor& x) const {
  return add_rowvec(matmul(relu(add_rowvec(matmul(x, w1), b1)), w2), b2);
}

void FeedForward::collect_parameters(const std::string& prefix,
                                     std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w1", w1});
  out.push_back({prefix + ".b1", b1});
  out.push_back({prefix + ".w2", w2});
  out.push_back({prefix + ".b2", b2});
}

LayerNormParams::LayerNormParams(int d_model)
    : gamma(Tensor::full({d_model}, 1.0, true)), beta(Tensor::zeros({d_model}, true)) {}

Tensor LayerNormParams::forward(const Tensor& x) const {
  return layer_norm(x, gamma, beta, kLayerNormEps);
}

void LayerNormParams::collect_parameters(const std::string& prefix,
                                         std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

// ---- blocks ----

EncoderBlock::EncoderBlock(const ModelConfig& cfg, Rng& rng)
    : self_attn(cfg.d_model, cfg.num_heads, rng),
      ln_attn(cfg.d_model),
      ln_ff(cfg.d_model),
      ff(cfg.d_model, cfg.ffn_dim(), rng),
      has_memory(cfg.use_memory) {
  if (has_memory) memory_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, rng);
}

Tensor EncoderBlock::forward(const Tensor& x, const Tensor* memory) const {
  Tensor attn_sum = self_attn.forward(x, x, x);
  if (has_memory && memory != nullptr && memory->defined()) {
    attn_sum = add(attn_sum, memory_attn.forward(x, *memory, *memory));
  }
  Tensor normed = ln_attn.forward(add(x, attn_sum));
  return ln_ff.forward(add(normed, ff.forward(normed)));
}

void EncoderBlock::collect_parameters(const std::string& prefix,
                                      std::vector<NamedTensor>& out) const {
  self_attn.collect_parameters(prefix + ".self", out);
  if (has_memory) memory_attn.collect_parameters(prefix + ".mem", out);
  ln_attn.collect_parameters(prefix + ".ln_attn", out);
  ff.collect_parameters(prefix + ".ff", out);
  ln_ff.collect_parameters(prefix + ".ln_ff", out);
}

DecoderBlock::DecoderBlock(const ModelConfig& cfg, Rng& rng)
    : self_attn(cfg.d_model, cfg.num_heads, rng),
      cross_attn(cfg.d_model, cfg.num_heads, rng),
      ln_attn(cfg.d_model),
      ln_ff(cfg.d_model),
      ff(cfg.d_model, cfg.ffn_dim(), rng),
      has_memory(cfg.use_memory) {
  if (has_memory) memory_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, rng);
}

Tensor DecoderBlock::forward(const Tensor& y, const Tensor& encoder_out, const Tensor* memory,
                             const Tensor& mask) const {
  Tensor attn_sum = self_attn.forward(y, y, y, &mask);
  attn_sum = add(attn_sum, cross_attn.forward(y, encoder_out, encoder_out));
  if (has_memory && memory != nullptr && memory->defined()) {
    attn_sum = add(attn_sum, memory_attn.forward(y, *memory, *memory));
  }
  Tensor normed = ln_attn.forward(add(y, attn_sum));
  return ln_ff.forward(add(normed, ff.forward(normed)));
}

void DecoderBlock::collect_parameters(const std::string& prefix,
                                      std::vector<NamedTensor>& out) const {
  self_attn.collect_parameters(prefix + ".self", out);
  cross_attn.collect_parameters(prefix + ".cross", out);
  if (has_memory) memory_attn.collect_parameters(prefix + ".mem", out);
  ln_attn.collect_parameters(prefix + ".ln_attn", out);
  ff.collect_parameters(prefix + ".ff", out);
  ln_ff.collect_parameters(prefix + ".ln_ff", out);
}

// ---- helpers ----

Tensor sinusoidal_positions(int max_len, int d_model) {
  Tensor pe = Tensor::zeros({max_len, d_model});
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d_model; ++i) {
      const double angle =
          pos / std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / d_model);
      pe.data()[static_cast<std::size_t>(pos) * d_model + i] =
          (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor causal_mask(int len) {
  Tensor mask = Tensor::zeros({len, len});
  for (int r = 0; r < len; ++r)
    for (int c = 0; c <= r; ++c) mask.data()[static_cast<std::size_t>(r) * len + c] = 1.0;
  return mask;
}

// ---- model ----

MemoryAugmentedTransformer::MemoryAugmentedTransformer(ModelConfig config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(seed);
  embedding_ = xavier_uniform({config_.vocab_size, config_.d_model}, rng);
  if (config_.separate_memory_embedding) {
    memory_embedding_ = xavier_uniform({config_.vocab_size, config_.d_model}, rng);
  }
  positions_ = sinusoidal_positions(config_.max_seq_len, config_.d_model);
  encoder_.reserve(static_cast<std::size_t>(config_.num_layers));
  decoder_.reserve(static_cast<std::size_t>(config_.num_layers));
  for (int i = 0; i < config_.num_layers; ++i) encoder_.emplace_back(config_, rng);
  for (int i = 0; i < config_.num_layers; ++i) decoder_.emplace_back(config_, rng);
  out_w_ = xavier_uniform({config_.d_model, config_.vocab_size}, rng);
  out_b_ = Tensor::zeros({config_.vocab_size}, true);
}

Tensor MemoryAugmentedTransformer::embed_tokens(const std::vector<int>& ids,
                                                bool with_positions) const {
  Tensor x = embedding_lookup(embedding_, ids);
  if (!with_positions) return x;
  const int len = static_cast<int>(ids.size());
  Tensor pos = Tensor::zeros({len, config_.d_model});
  std::memcpy(pos.data(), positions_.data(),
              static_cast<std::size_t>(len) * config_.d_model * sizeof(double));
  return add(x, pos);
}

Tensor MemoryAugmentedTransformer::embed_memory(const std::vector<int>& memory_ids) const {
  if (memory_ids.empty()) return Tensor();
  return embedding_lookup(memory_embedding(), memory_ids);
}

Tensor MemoryAugmentedTransformer::encode(const std::vector<int>& input_ids,
                                          const std::vector<int>& memory_ids) const {
  if (input_ids.empty()) throw LengthError("encode requires a non-empty input sequence");
  if (static_cast<int>(input_ids.size()) > config_.max_seq_len) {
    throw LengthError("input length " + std::to_string(input_ids.size()) +
                      " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  if (static_cast<int>(memory_ids.size()) > config_.max_memory_len) {
    throw LengthError("memory length " + std::to_string(memory_ids.size()) +
                      " exceeds max_memory_len " + std::to_string(config_.max_memory_len));
  }
  Tensor x = embed_tokens(input_ids, true);
  Tensor memory = config_.use_memory ? embed_memory(memory_ids) : Tensor();
  for (const EncoderBlock& block : encoder_) {
    x = block.forward(x, memory.defined() ? &memory : nullptr);
  }
  return x;
}

Tensor MemoryAugmentedTransformer::decode(const std::vector<int>& target_prefix_ids,
                                          const Tensor& encoder_out,
                                          const std::vector<int>& memory_ids) const {
  if (target_prefix_ids.empty() || target_prefix_ids.front() != config_.bos_id) {
    throw ProtocolError("decoder prefix must begin with the BOS token");
  }
  if (static_cast<int>(target_prefix_ids.size()) > config_.max_seq_len) {
    throw LengthError("target length " + std::to_string(target_prefix_ids.size()) +
                      " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  Tensor y = embed_tokens(target_prefix_ids, true);
  Tensor memory = config_.use_memory ? embed_memory(memory_ids) : Tensor();
  Tensor mask = causal_mask(static_cast<int>(target_prefix_ids.size()));
  for (const DecoderBlock& block : decoder_) {
    y = block.forward(y, encoder_out, memory.defined() ? &memory : nullptr, mask);
  }
  return add_rowvec(matmul(y, out_w_), out_b_);
}

std::vector<int> MemoryAugmentedTransformer::generate(const std::vector<int>& input_ids,
                                                      const std::vector<int>& memory_ids,
                                                      int max_len) const {
  NoGradGuard no_grad;
  const int cap = std::min(max_len, config_.max_seq_len - 1);
  Tensor encoder_out = encode(input_ids, memory_ids);
  std::vector<int> prefix{config_.bos_id};
  std::vector<int> output;
  for (int step = 0; step < cap; ++step) {
    Tensor logits = decode(prefix, encoder_out, memory_ids);
    const int last = logits.dim(0) - 1;
    int best = 0;
    for (int v = 1; v < config_.vocab_size; ++v) {
      if (logits.at(last, v) > logits.at(last, best)) best = v;
    }
    if (best == config_.eos_id) break;
    output.push_back(best);
    prefix.push_back(best);
  }
  return output;
}

TeacherForced MemoryAugmentedTransformer::teacher_forced(
    const std::vector<int>& input_ids, const std::vector<int>& memory_ids,
    const std::vector<int>& target_with_bos_eos) const {
  if (target_with_bos_eos.size() < 2 || target_with_bos_eos.front() != config_.bos_id ||
      target_with_bos_eos.back() != config_.eos_id) {
    throw ProtocolError("teacher forcing expects a target wrapped in BOS ... EOS");
  }
  std::vector<int> dec_in(target_with_bos_eos.begin(), target_with_bos_eos.end() - 1);
  std::vector<int> labels(target_with_bos_eos.begin() + 1, target_with_bos_eos.end());
  Tensor encoder_out = encode(input_ids, memory_ids);
  Tensor logits = decode(dec_in, encoder_out, memory_ids);
  return TeacherForced{logits, labels};
}

std::vector<NamedTensor> MemoryAugmentedTransformer::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", embedding_});
  if (config_.separate_memory_embedding) out.push_back({"memory_embedding", memory_embedding_});
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    encoder_[i].collect_parameters("enc" + std::to_string(i), out);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    decoder_[i].collect_parameters("dec" + std::to_string(i), out);
  }
  out.push_back({"out_proj.w", out_w_});
  out.push_back({"out_proj.b", out_b_});
  return out;
}

long MemoryAugmentedTransformer::parameter_count() const {
  long n = 0;
  for (const NamedTensor& p : parameters()) n += p.tensor.size();
  return n;
}

long MemoryAugmentedTransformer::expected_parameter_count(const ModelConfig& config) {
  const long d = config.d_model;
  const long v = config.vocab_size;
  const long f = config.ffn_dim();
  const long attn = 4 * d * d;
  const long norm = 2 * d;
  const long ffn = d * f + f + f * d + d;
  const long mem = config.use_memory ? attn : 0;
  const long enc_block = attn + mem + ffn + 2 * norm;
  const long dec_block = attn + attn + mem + ffn + 2 * norm;
  long total = v * d;
  if (config.separate_memory_embedding) total += v * d;
  total += config.num_layers * (enc_block + dec_block);
  total += d * v + v;  // output projection
  return total;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'G', 'A', 'T', 'C', 'K', 'P', 'T', '1'};

nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size},
                        {"d_model", c.d_model},
                        {"num_heads", c.num_heads},
                        {"num_layers", c.num_layers},
                        {"max_seq_len", c.max_seq_len},
                        {"max_memory_len", c.max_memory_len},
                        {"feedforward_dim", c.feedforward_dim},
                        {"pad_id", c.pad_id},
                        {"bos_id", c.bos_id},
                        {"eos_id", c.eos_id},
                        {"separate_memory_embedding", c.separate_memory_embedding},
                        {"use_memory", c.use_memory}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.max_memory_len = j.at("max_memory_len").get<int>();
  c.feedforward_dim = j.at("feedforward_dim").get<int>();
  c.pad_id = j.at("pad_id").get<int>();
  c.bos_id = j.at("bos_id").get<int>();
  c.eos_id = j.at("eos_id").get<int>();
  c.separate_memory_embedding = j.at("separate_memory_embedding").get<bool>();
  c.use_memory = j.at("use_memory").get<bool>();
  return c;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CompatibilityError("cannot open checkpoint file for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(checkpoint.format_version));
  nlohmann::json header = {{"config", config_to_json(checkpoint.config)},
                           {"vocab", checkpoint.vocab_tokens}};
  const std::string header_str = header.dump();
  write_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  write_u32(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const NamedTensor& t : checkpoint.tensors) {
    write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.tensor.ndim()));
    for (int i = 0; i < t.tensor.ndim(); ++i)
      write_u32(out, static_cast<std::uint32_t>(t.tensor.dim(i)));
    out.write(reinterpret_cast<const char*>(t.tensor.data()),
              static_cast<std::streamsize>(sizeof(double)) * t.tensor.size());
  }
  if (!out) throw CompatibilityError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CompatibilityError("cannot open checkpoint file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CompatibilityError("not a checkpoint file (bad magic): " + path);
  }
  Checkpoint ckpt;
  ckpt.format_version = static_cast<int>(read_u32(in));
  if (ckpt.format_version != 1) {
    throw CompatibilityError("unsupported checkpoint format version " +
                             std::to_string(ckpt.format_version));
  }
  const std::uint32_t header_len = read_u32(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
    ckpt.config = config_from_json(header.at("config"));
    ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError("corrupt checkpoint header: " + std::string(e.what()));
  }
  const std::uint32_t count = read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t ndim = read_u32(in);
    Shape shape(ndim);
    int total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<int>(read_u32(in));
      total *= shape[d];
    }
    std::vector<double> values(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double)) * total);
    if (!in) throw CompatibilityError("truncated checkpoint file: " + path);
    ckpt.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return ckpt;
}

void apply_checkpoint(MemoryAugmentedTransformer& model, const Checkpoint& checkpoint) {
  copy_checkpoint_tensors(model.parameters(), checkpoint);
}

void copy_checkpoint_tensors(std::vector<NamedTensor> params, const Checkpoint& checkpoint) {
  if (params.size() != checkpoint.tensors.size()) {
    throw CompatibilityError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                             " tensors but the model has " + std::to_string(params.size()) +
                             " parameters");
  }
  for (NamedTensor& p : params) {
    const NamedTensor* found = nullptr;
    for (const NamedTensor& t : checkpoint.tensors) {
      if (t.name == p.name) {
        found = &t;
        break;
      }
    }
    if (found == nullptr) {
      throw CompatibilityError("checkpoint is missing parameter '" + p.name + "'");
    }
    if (found->tensor.shape() != p.tensor.shape()) {
      throw CompatibilityError("checkpoint parameter '" + p.name + "' has shape " +
                               shape_str(found->tensor.shape()) + ", expected " +
                               shape_str(p.tensor.shape()));
    }
    p.tensor.values() = found->tensor.values();
  }
}

}  // namespace gat
