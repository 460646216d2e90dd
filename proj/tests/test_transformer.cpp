#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gat/tensor.hpp"
#include "gat/transformer.hpp"

using namespace gat;

namespace {

ModelConfig tiny_config(int vocab = 20, bool use_memory = true) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  cfg.max_seq_len = 16;
  cfg.max_memory_len = 16;
  cfg.feedforward_dim = 16;
  cfg.use_memory = use_memory;
  return cfg;
}

void fill_random(Tensor t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
}

void set_identity(Tensor t) {
  const int n = t.dim(0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) t.data()[static_cast<std::size_t>(r) * n + c] = r == c ? 1.0 : 0.0;
}

// Copies every identically-named parameter from src into dst; parameters
// only present in src (the memory branch) are left out.
void share_weights(MemoryAugmentedTransformer& dst, const MemoryAugmentedTransformer& src) {
  auto dst_params = dst.parameters();
  auto src_params = src.parameters();
  for (NamedTensor& d : dst_params) {
    for (const NamedTensor& s : src_params) {
      if (s.name == d.name) {
        d.tensor.values() = s.tensor.values();
        break;
      }
    }
  }
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  ModelConfig cfg = tiny_config();
  cfg.num_heads = 3;  // does not divide d_model = 8
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("num_heads"), ConfigurationError);
  cfg = tiny_config();
  cfg.bos_id = cfg.pad_id;
  CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
  cfg = tiny_config();
  cfg.vocab_size = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("vocab_size"), ConfigurationError);
}

TEST_CASE("attention with equal scores averages the value rows") {
  Rng rng(3);
  MultiHeadAttention attn(4, 1, rng);
  set_identity(attn.wq);
  set_identity(attn.wk);
  set_identity(attn.wv);
  set_identity(attn.wo);

  Tensor q = Tensor::zeros({2, 4});  // zero queries -> all scores equal
  Tensor kv = Tensor::zeros({3, 4});
  fill_random(kv, rng);
  Tensor out = attn.forward(q, kv, kv);
  for (int c = 0; c < 4; ++c) {
    const double avg = (kv.at(0, c) + kv.at(1, c) + kv.at(2, c)) / 3.0;
    CHECK(out.at(0, c) == doctest::Approx(avg).epsilon(1e-12));
    CHECK(out.at(1, c) == doctest::Approx(avg).epsilon(1e-12));
  }
  Tape::active().clear();
}

TEST_CASE("single key gets attention weight exactly one") {
  Rng rng(7);
  MultiHeadAttention attn(8, 2, rng);
  Tensor q = Tensor::zeros({3, 8});
  Tensor kv = Tensor::zeros({1, 8});
  fill_random(q, rng);
  fill_random(kv, rng);
  std::vector<Tensor> weights;
  attn.forward(q, kv, kv, nullptr, &weights);
  REQUIRE(weights.size() == 2);
  for (const Tensor& w : weights) {
    for (int r = 0; r < 3; ++r) CHECK(w.at(r, 0) == 1.0);
  }
  Tape::active().clear();
}

TEST_CASE("causal mask zeroes future positions exactly") {
  Rng rng(11);
  MultiHeadAttention attn(8, 2, rng);
  Tensor x = Tensor::zeros({3, 8});
  fill_random(x, rng);
  Tensor mask = causal_mask(3);
  std::vector<Tensor> weights;
  attn.forward(x, x, x, &mask, &weights);
  for (const Tensor& w : weights) {
    CHECK(w.at(0, 1) == 0.0);
    CHECK(w.at(0, 2) == 0.0);
    CHECK(w.at(1, 2) == 0.0);
  }
  Tape::active().clear();
}

TEST_CASE("attention weights sum to one per query row, memory-shaped included") {
  Rng rng(13);
  MultiHeadAttention attn(8, 4, rng);
  Tensor q = Tensor::zeros({3, 8});
  Tensor kv = Tensor::zeros({6, 8});  // memory attention shape: Tk != Tq
  fill_random(q, rng);
  fill_random(kv, rng);
  std::vector<Tensor> weights;
  attn.forward(q, kv, kv, nullptr, &weights);
  for (const Tensor& w : weights) {
    for (int r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int c = 0; c < 6; ++c) s += w.at(r, c);
      CHECK(std::fabs(s - 1.0) < 1e-9);
    }
  }
  Tape::active().clear();
}

TEST_CASE("fully masked query row raises a masking error") {
  Rng rng(17);
  MultiHeadAttention attn(4, 1, rng);
  Tensor x = Tensor::zeros({2, 4});
  fill_random(x, rng);
  Tensor mask = Tensor::zeros({2, 2});
  mask.data()[0] = 1.0;  // row 1 fully masked
  CHECK_THROWS_AS(static_cast<void>(attn.forward(x, x, x, &mask)), MaskingError);
  Tape::active().clear();
}

TEST_CASE("empty memory encodes bit-identically to the memory-free model") {
  MemoryAugmentedTransformer full(tiny_config(20, true), 42);
  MemoryAugmentedTransformer bare(tiny_config(20, false), 1);
  share_weights(bare, full);

  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> ids;
    const int len = 1 + static_cast<int>(rng.next_index(10));
    for (int i = 0; i < len; ++i) ids.push_back(static_cast<int>(rng.next_index(20)));
    Tensor a = full.encode(ids, {});
    Tensor b = bare.encode(ids, {});
    CHECK(a.values() == b.values());
  }
  Tape::active().clear();
}

TEST_CASE("memory emphasis changes the encoding") {
  MemoryAugmentedTransformer model(tiny_config(), 5);
  std::vector<int> ids{4, 9, 12, 7};
  Tensor without = model.encode(ids, {});
  Tensor with = model.encode(ids, ids);
  double max_diff = 0.0;
  for (int i = 0; i < with.size(); ++i)
    max_diff = std::max(max_diff, std::fabs(with.at(i) - without.at(i)));
  CHECK(max_diff > 0.0);
  Tape::active().clear();
}

TEST_CASE("encode shape and length guards") {
  MemoryAugmentedTransformer model(tiny_config(), 6);
  Tensor one = model.encode({5}, {});
  CHECK(one.shape() == Shape{1, 8});

  std::vector<int> too_long(17, 3);
  CHECK_THROWS_AS(static_cast<void>(model.encode(too_long, {})), LengthError);
  CHECK_THROWS_AS(static_cast<void>(model.encode({1}, too_long)), LengthError);
  CHECK_THROWS_AS(static_cast<void>(model.encode({}, {})), LengthError);
  Tape::active().clear();
}

TEST_CASE("decode produces vocab logits under the causal contract") {
  MemoryAugmentedTransformer model(tiny_config(), 8);
  const int bos = model.config().bos_id;
  std::vector<int> input{4, 5, 6};
  Tensor enc = model.encode(input, {});

  Tensor logits = model.decode({bos, 7, 9, 11}, enc, {});
  CHECK(logits.shape() == Shape{4, 20});

  // changing the target token at position j leaves logits before j unchanged
  Tensor changed = model.decode({bos, 7, 13, 11}, enc, {});
  for (int c = 0; c < 20; ++c) {
    CHECK(logits.at(0, c) == changed.at(0, c));
    CHECK(logits.at(1, c) == changed.at(1, c));
  }

  CHECK_THROWS_AS(static_cast<void>(model.decode({7, 9}, enc, {})), ProtocolError);
  Tape::active().clear();
}

TEST_CASE("zero encoder output and empty memory leave logits a function of the prefix") {
  MemoryAugmentedTransformer model(tiny_config(), 9);
  const int bos = model.config().bos_id;
  Tensor zeros3 = Tensor::zeros({3, 8});
  Tensor zeros5 = Tensor::zeros({5, 8});
  Tensor a = model.decode({bos, 4, 6}, zeros3, {});
  Tensor b = model.decode({bos, 4, 6}, zeros5, {});
  CHECK(a.values() == b.values());
  Tape::active().clear();
}

TEST_CASE("generate follows the greedy contract on rigged models") {
  MemoryAugmentedTransformer model(tiny_config(), 10);
  for (NamedTensor& p : model.parameters()) {
    std::fill(p.tensor.values().begin(), p.tensor.values().end(), 0.0);
  }
  // all-zero weights leave only the output bias, so the argmax is rigged
  // through it
  Tensor bias;
  for (NamedTensor& p : model.parameters()) {
    if (p.name == "out_proj.b") bias = p.tensor;
  }
  bias.data()[model.config().eos_id] = 5.0;
  CHECK(model.generate({4, 5}, {}, 8).empty());

  bias.data()[model.config().eos_id] = 0.0;
  bias.data()[7] = 5.0;
  std::vector<int> out = model.generate({4, 5}, {}, 8);
  CHECK(out == std::vector<int>(8, 7));
  Tape::active().clear();
}

TEST_CASE("parameter count matches the closed form") {
  for (bool use_memory : {true, false}) {
    for (bool separate : {false, true}) {
      ModelConfig cfg = tiny_config(24, use_memory);
      cfg.separate_memory_embedding = separate;
      cfg.num_layers = 2;
      MemoryAugmentedTransformer model(cfg, 3);
      CHECK(model.parameter_count() == MemoryAugmentedTransformer::expected_parameter_count(cfg));
    }
  }
}

TEST_CASE("construction is deterministic under the seed") {
  MemoryAugmentedTransformer a(tiny_config(), 77);
  MemoryAugmentedTransformer b(tiny_config(), 77);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].tensor.values() == pb[i].tensor.values());
  }
}

TEST_CASE("one-layer model passes the gradient check") {
  MemoryAugmentedTransformer model(tiny_config(), 12);
  std::vector<int> input{4, 9, 3};
  std::vector<int> memory{6, 11};
  std::vector<int> target{model.config().bos_id, 5, 8, model.config().eos_id};
  auto f = [&] {
    TeacherForced tf = model.teacher_forced(input, memory, target);
    return sparse_categorical_cross_entropy(tf.logits, tf.labels, model.config().pad_id);
  };
  auto report = finite_difference_check(f, model.parameters(), 1e-5);
  INFO("worst: ", report.worst_param, "[", report.worst_index, "]");
  CHECK(report.max_rel_error < 1e-4);
  Tape::active().clear();
}

TEST_CASE("checkpoints round-trip and validate") {
  const std::string path = std::filesystem::temp_directory_path() / "gat_test.ckpt";
  ModelConfig cfg = tiny_config();
  MemoryAugmentedTransformer model(cfg, 21);
  Checkpoint ckpt{1, cfg, {"pad", "bos", "eos", "unk", "alpha"}, model.parameters()};
  save_checkpoint(path, ckpt);

  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.format_version == 1);
  CHECK(loaded.vocab_tokens.size() == 5);
  CHECK(loaded.config.d_model == cfg.d_model);

  MemoryAugmentedTransformer restored(loaded.config, 999);
  apply_checkpoint(restored, loaded);
  std::vector<int> ids{3, 14, 2};
  CHECK(restored.encode(ids, {}).values() == model.encode(ids, {}).values());

  // a model with a different architecture must be rejected
  ModelConfig other = tiny_config();
  other.num_layers = 2;
  MemoryAugmentedTransformer bigger(other, 1);
  CHECK_THROWS_AS(apply_checkpoint(bigger, loaded), CompatibilityError);

  // corrupt file
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(static_cast<void>(load_checkpoint(path)), CompatibilityError);
  std::filesystem::remove(path);
  Tape::active().clear();
}
