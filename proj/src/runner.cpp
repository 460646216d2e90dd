#include "gat/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace fs = std::filesystem;

namespace gat {

// ---- config ----

void RunConfig::validate() const {
  static const std::set<std::string> tasks{"car-stage1", "car-stage2", "car-stage3", "style"};
  if (!tasks.count(task)) {
    throw ConfigurationError("task '" + task + "' is not one of car-stage1/2/3 or style");
  }
  if (standard_weight < 0 || adversarial_weight < 0) {
    throw ConfigurationError("loss weights must be nonnegative");
  }
  for (double w : condition_weights) {
    if (w < 0) throw ConfigurationError("condition weights must be nonnegative");
  }
  if (!condition_weights.empty() && condition_weights.size() != conditions.size()) {
    throw ConfigurationError("condition_weights must match conditions");
  }
  if (epochs <= 0) throw ConfigurationError("epochs must be positive");
  if (batch_size <= 0) throw ConfigurationError("batch_size must be positive");
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw ConfigurationError("test_fraction must lie in (0, 1)");
  }
  if (max_generate_len <= 0) throw ConfigurationError("max_generate_len must be positive");
  if (train_file.empty() || !fs::exists(train_file)) {
    throw ConfigurationError("train_file does not exist: " + train_file);
  }
  if (!lexicon_file.empty() && !fs::exists(lexicon_file)) {
    throw ConfigurationError("lexicon_file does not exist: " + lexicon_file);
  }
  if (output_dir.empty()) throw ConfigurationError("output_dir must be set");
}

namespace {

nlohmann::json model_to_json(const ModelConfig& m) {
  return nlohmann::json{{"vocab_size", m.vocab_size},
                        {"d_model", m.d_model},
                        {"num_heads", m.num_heads},
                        {"num_layers", m.num_layers},
                        {"max_seq_len", m.max_seq_len},
                        {"max_memory_len", m.max_memory_len},
                        {"feedforward_dim", m.feedforward_dim},
                        {"separate_memory_embedding", m.separate_memory_embedding},
                        {"use_memory", m.use_memory}};
}

ModelConfig model_from_json(const nlohmann::json& j, ModelConfig base) {
  base.vocab_size = j.value("vocab_size", base.vocab_size);
  base.d_model = j.value("d_model", base.d_model);
  base.num_heads = j.value("num_heads", base.num_heads);
  base.num_layers = j.value("num_layers", base.num_layers);
  base.max_seq_len = j.value("max_seq_len", base.max_seq_len);
  base.max_memory_len = j.value("max_memory_len", base.max_memory_len);
  base.feedforward_dim = j.value("feedforward_dim", base.feedforward_dim);
  base.separate_memory_embedding =
      j.value("separate_memory_embedding", base.separate_memory_embedding);
  base.use_memory = j.value("use_memory", base.use_memory);
  return base;
}

}  // namespace

std::string RunConfig::to_json_string() const {
  nlohmann::json j{{"task", task},
                   {"model", model_to_json(model)},
                   {"optimizer",
                    {{"lr", optimizer.lr},
                     {"beta1", optimizer.beta1},
                     {"beta2", optimizer.beta2},
                     {"epsilon", optimizer.epsilon}}},
                   {"standard_weight", standard_weight},
                   {"adversarial_weight", adversarial_weight},
                   {"conditions", conditions},
                   {"condition_weights", condition_weights},
                   {"poi_differentiable", poi_differentiable},
                   {"non_saturating", non_saturating},
                   {"train_discriminator", train_discriminator},
                   {"epochs", epochs},
                   {"batch_size", batch_size},
                   {"seed", seed},
                   {"train_file", train_file},
                   {"lexicon_file", lexicon_file},
                   {"output_dir", output_dir},
                   {"memory_ablation", memory_ablation},
                   {"test_fraction", test_fraction},
                   {"split_seed", split_seed},
                   {"max_generate_len", max_generate_len}};
  return j.dump(2);
}

RunConfig RunConfig::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  c.task = j.value("task", c.task);
  if (j.contains("model")) c.model = model_from_json(j.at("model"), c.model);
  if (j.contains("optimizer")) {
    const nlohmann::json& o = j.at("optimizer");
    c.optimizer.lr = o.value("lr", c.optimizer.lr);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
  }
  c.standard_weight = j.value("standard_weight", c.standard_weight);
  c.adversarial_weight = j.value("adversarial_weight", c.adversarial_weight);
  c.conditions = j.value("conditions", c.conditions);
  c.condition_weights = j.value("condition_weights", c.condition_weights);
  c.poi_differentiable = j.value("poi_differentiable", c.poi_differentiable);
  c.non_saturating = j.value("non_saturating", c.non_saturating);
  c.train_discriminator = j.value("train_discriminator", c.train_discriminator);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.train_file = j.value("train_file", c.train_file);
  c.lexicon_file = j.value("lexicon_file", c.lexicon_file);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.memory_ablation = j.value("memory_ablation", c.memory_ablation);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.split_seed = j.value("split_seed", c.split_seed);
  c.max_generate_len = j.value("max_generate_len", c.max_generate_len);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

// ---- assembly helpers ----

SlotLexicon lexicon_from_config(const RunConfig& config) {
  return config.lexicon_file.empty() ? SlotLexicon::defaults()
                                     : SlotLexicon::from_file(config.lexicon_file);
}

GatOptions options_from_config(const RunConfig& config) {
  GatOptions opt;
  opt.generator_opt = config.optimizer;
  opt.discriminator_opt = config.optimizer;
  opt.standard_weight = config.standard_weight;
  opt.adversarial_weight = config.adversarial_weight;
  opt.condition_weights = config.condition_weights;
  opt.non_saturating = config.non_saturating;
  opt.train_discriminator = config.train_discriminator;
  return opt;
}

std::vector<ConditionLoss> conditions_from_config(const RunConfig& config,
                                                  const SlotIdLexicon& lexicon) {
  std::vector<ConditionLoss> out;
  for (const std::string& name : config.conditions) {
    if (name == "poi") {
      out.push_back(poi_condition(lexicon, config.poi_differentiable));
    } else if (name == "zero") {
      out.push_back(zero_condition());
    } else {
      throw ConfigurationError("unknown condition loss '" + name + "'");
    }
  }
  return out;
}

Vocabulary vocabulary_for_turns(const std::vector<DialogueTurn>& turns) {
  std::vector<std::vector<std::string>> streams;
  streams.reserve(turns.size() * 3);
  for (const DialogueTurn& t : turns) {
    streams.push_back(tokenize(t.input_text));
    streams.push_back(tokenize(t.target_text));
    for (const std::string& item : t.memory_items) streams.push_back(tokenize(item));
  }
  return Vocabulary::build(streams);
}

// ---- training ----

std::string EpochRecord::to_json_string() const {
  nlohmann::json j{{"epoch", epoch},
                   {"standard_loss", train.standard_loss},
                   {"condition_losses", train.condition_losses},
                   {"adversarial_loss", train.adversarial_loss},
                   {"composed_loss", train.composed_loss},
                   {"discriminator_loss", train.discriminator_loss},
                   {"discriminator_accuracy", train.discriminator_accuracy},
                   {"token_accuracy", train.token_accuracy},
                   {"val_standard", val_standard},
                   {"val_token_accuracy", val_token_accuracy}};
  return j.dump();
}

TrainResult run_training(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  {
    std::ofstream echo(fs::path(config.output_dir) / "config_echo.json");
    echo << config.to_json_string() << "\n";
  }

  std::vector<DialogueTurn> turns =
      config.task == "style" ? load_style_corpus(config.train_file) : load_turns(config.train_file);
  if (turns.empty()) throw DegenerateBatchError("training corpus is empty");

  const Vocabulary vocab = vocabulary_for_turns(turns);
  ModelConfig model_cfg = config.model;
  model_cfg.vocab_size = vocab.size();
  model_cfg.validate();

  auto [train_turns, test_turns] =
      split_train_test(turns, config.test_fraction, config.split_seed);
  save_turns((fs::path(config.output_dir) / "train_split.jsonl").string(), train_turns);
  save_turns((fs::path(config.output_dir) / "test_split.jsonl").string(), test_turns);

  const SlotLexicon lexicon = lexicon_from_config(config);
  const SlotIdLexicon bound = bind_lexicon(lexicon, vocab);
  GatModel model(model_cfg, options_from_config(config),
                 conditions_from_config(config, bound), config.seed);

  TrainResult result;
  auto encode_all = [&](const std::vector<DialogueTurn>& src) {
    std::vector<EncodedTurn> out;
    out.reserve(src.size());
    for (const DialogueTurn& t : src) {
      EncodedTurn enc = encode_turn(t, vocab, model_cfg, &result.encode_stats);
      if (config.memory_ablation) enc.memory_ids.clear();
      out.push_back(std::move(enc));
    }
    return out;
  };
  const std::vector<EncodedTurn> train_encoded = encode_all(train_turns);
  const std::vector<EncodedTurn> test_encoded = encode_all(test_turns);

  const fs::path out_dir(config.output_dir);
  result.metrics_file = (out_dir / "metrics.jsonl").string();
  result.best_checkpoint = (out_dir / "checkpoint_best.gatckpt").string();
  result.final_checkpoint = (out_dir / "checkpoint_final.gatckpt").string();
  std::ofstream metrics_out(result.metrics_file);

  auto save_model = [&](const std::string& path) {
    save_checkpoint(path,
                    Checkpoint{1, model_cfg, vocab.tokens(), model.generator().parameters()});
    const fs::path p(path);
    save_checkpoint((p.parent_path() / (p.stem().string() + "_discriminator.gatckpt")).string(),
                    Checkpoint{1, model_cfg, vocab.tokens(), model.discriminator().parameters()});
  };

  Rng shuffle_rng(config.seed);
  std::vector<std::size_t> order(train_encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_val = 0.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.next_index(i + 1)]);
    }
    StepMetrics sums;
    sums.condition_losses.assign(config.conditions.size(), 0.0);
    int steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<EncodedTurn> batch;
      for (std::size_t k = start;
           k < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size)); ++k) {
        batch.push_back(train_encoded[order[k]]);
      }
      StepMetrics m = gat_train_step(model, batch);
      sums.standard_loss += m.standard_loss;
      sums.adversarial_loss += m.adversarial_loss;
      sums.composed_loss += m.composed_loss;
      sums.discriminator_loss += m.discriminator_loss;
      sums.discriminator_accuracy += m.discriminator_accuracy;
      sums.token_accuracy += m.token_accuracy;
      for (std::size_t c = 0; c < m.condition_losses.size(); ++c) {
        sums.condition_losses[c] += m.condition_losses[c];
      }
      ++steps;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train = sums;
    if (steps > 0) {
      record.train.standard_loss /= steps;
      record.train.adversarial_loss /= steps;
      record.train.composed_loss /= steps;
      record.train.discriminator_loss /= steps;
      record.train.discriminator_accuracy /= steps;
      record.train.token_accuracy /= steps;
      for (double& c : record.train.condition_losses) c /= steps;
    }
    const EvalMetrics val = evaluate_teacher_forced(model.generator(), test_encoded);
    record.val_standard = val.standard_loss;
    record.val_token_accuracy = val.token_accuracy;
    metrics_out << record.to_json_string() << "\n";
    result.epochs.push_back(record);

    if (result.best_epoch < 0 || record.val_standard < best_val) {
      best_val = record.val_standard;
      result.best_epoch = epoch;
      result.best_val_standard = best_val;
      save_model(result.best_checkpoint);
    }
  }
  save_model(result.final_checkpoint);
  metrics_out.close();

  nlohmann::json manifest{
      {"config", "config_echo.json"},
      {"metrics", "metrics.jsonl"},
      {"train_split", "train_split.jsonl"},
      {"test_split", "test_split.jsonl"},
      {"checkpoint_best", fs::path(result.best_checkpoint).filename().string()},
      {"checkpoint_final", fs::path(result.final_checkpoint).filename().string()},
      {"best_epoch", result.best_epoch},
      {"best_val_standard", result.best_val_standard},
      {"unknown_tokens", result.encode_stats.unknown_tokens},
      {"truncated_sequences", result.encode_stats.truncated_sequences}};
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << "\n";
  return result;
}

// ---- evaluation ----

EvaluationArtifacts evaluate_checkpoint(const std::string& checkpoint_path,
                                        const std::string& test_file,
                                        const std::string& baseline_predictions_file,
                                        const std::string& out_dir, bool memory_ablation,
                                        int resamples, std::uint64_t seed,
                                        const std::string& lexicon_file) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (static_cast<int>(ckpt.vocab_tokens.size()) != ckpt.config.vocab_size) {
    throw CompatibilityError("checkpoint vocabulary of " +
                             std::to_string(ckpt.vocab_tokens.size()) +
                             " tokens does not match config vocab_size " +
                             std::to_string(ckpt.config.vocab_size));
  }
  const Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocab_tokens);
  MemoryAugmentedTransformer model(ckpt.config, 0);
  apply_checkpoint(model, ckpt);

  const std::vector<DialogueTurn> turns = load_turns(test_file);
  if (turns.empty()) throw DegenerateBatchError("evaluation corpus is empty");

  // a test corpus that is mostly unknown to the checkpoint's vocabulary is
  // a task mismatch, not a scoring problem
  int total_tokens = 0, unknown_tokens = 0;
  for (const DialogueTurn& t : turns) {
    for (const std::string& tok : tokenize(t.input_text)) {
      ++total_tokens;
      if (vocab.id_or_unk(tok) == Vocabulary::kUnk) ++unknown_tokens;
    }
  }
  if (total_tokens > 0 && unknown_tokens * 2 > total_tokens) {
    throw CompatibilityError("over half of the test tokens are unknown to the checkpoint "
                             "vocabulary (" +
                             std::to_string(unknown_tokens) + "/" +
                             std::to_string(total_tokens) + ")");
  }

  EvaluationArtifacts artifacts;
  std::vector<TokenSeq> candidates, references;
  for (const DialogueTurn& t : turns) {
    EncodedTurn enc = encode_turn(t, vocab, ckpt.config);
    if (memory_ablation) enc.memory_ids.clear();
    const std::vector<int> out =
        model.generate(enc.input_ids, enc.memory_ids, ckpt.config.max_seq_len - 1);
    candidates.push_back(vocab.decode(out));
    references.push_back(tokenize(t.target_text));
    artifacts.predictions.push_back(join_tokens(candidates.back()));
  }
  for (TokenSeq& c : candidates) {
    if (c.empty()) c.push_back("<empty>");  // metrics need non-empty rows
  }

  std::vector<TokenSeq> baseline;
  if (!baseline_predictions_file.empty()) {
    std::ifstream in(baseline_predictions_file);
    if (!in) throw IngestionError("cannot open baseline predictions: " +
                                  baseline_predictions_file);
    std::string line;
    while (std::getline(in, line)) baseline.push_back(tokenize(line));
    if (baseline.size() != references.size()) {
      throw AlignmentError("baseline predictions hold " + std::to_string(baseline.size()) +
                           " rows, test corpus " + std::to_string(references.size()));
    }
    for (TokenSeq& b : baseline) {
      if (b.empty()) b.push_back("<empty>");
    }
  }

  const SlotLexicon lexicon =
      lexicon_file.empty() ? SlotLexicon::defaults() : SlotLexicon::from_file(lexicon_file);
  artifacts.report = evaluate_outputs(
      fs::path(checkpoint_path).stem().string(), candidates, references, lexicon,
      baseline.empty() ? nullptr : &baseline, "baseline", resamples, seed);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    artifacts.report_file = (fs::path(out_dir) / "report.json").string();
    std::ofstream(artifacts.report_file) << artifacts.report.to_json_string() << "\n";
    artifacts.predictions_file = (fs::path(out_dir) / "predictions.txt").string();
    std::ofstream pred_out(artifacts.predictions_file);
    for (const std::string& p : artifacts.predictions) pred_out << p << "\n";
  }
  return artifacts;
}

// ---- selfcheck ----

SelfCheckResult run_selfcheck() {
  SelfCheckResult result;
  auto check = [&result](const std::string& name, bool passed) {
    result.checks.emplace_back(name, passed);
    result.all_passed = result.all_passed && passed;
  };

  {
    Rng rng(17);
    Tensor a = xavier_uniform({4, 5}, rng);
    Tensor b = xavier_uniform({5, 3}, rng);
    Tensor probe = xavier_uniform({4, 3}, rng, false);
    auto f = [&] { return sum(mul(matmul(a, b), probe)); };
    const auto rep = finite_difference_check(f, {{"a", a}, {"b", b}}, 1e-5);
    check("gradient: matmul", rep.max_rel_error < 1e-4);
  }
  {
    Rng rng(19);
    Tensor x = xavier_uniform({3, 6}, rng);
    Tensor gamma = Tensor::full({6}, 1.0, true);
    Tensor beta = Tensor::zeros({6}, true);
    Tensor probe = xavier_uniform({3, 6}, rng, false);
    auto f = [&] {
      return add(sum(mul(softmax(x, 1), probe)),
                 sum(mul(layer_norm(x, gamma, beta, 1e-5), probe)));
    };
    const auto rep =
        finite_difference_check(f, {{"x", x}, {"gamma", gamma}, {"beta", beta}}, 1e-5);
    check("gradient: softmax+layer_norm", rep.max_rel_error < 1e-4);
  }
  {
    Rng rng(23);
    Tensor table = xavier_uniform({8, 4}, rng);
    Tensor proj = xavier_uniform({4, 8}, rng);
    auto f = [&] {
      Tensor logits = matmul(embedding_lookup(table, {1, 3, 3, 6}), proj);
      return sparse_categorical_cross_entropy(logits, {2, 0, 5, 7}, 0);
    };
    const auto rep = finite_difference_check(f, {{"table", table}, {"proj", proj}}, 1e-5);
    check("gradient: embedding+cross_entropy", rep.max_rel_error < 1e-4);
  }
  {
    ModelConfig cfg;
    cfg.vocab_size = 20;
    cfg.d_model = 8;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    cfg.max_seq_len = 12;
    cfg.max_memory_len = 12;
    cfg.feedforward_dim = 16;
    MemoryAugmentedTransformer model(cfg, 12);
    auto f = [&] {
      TeacherForced tf = model.teacher_forced({4, 9, 3}, {6, 11}, {1, 5, 8, 2});
      return sparse_categorical_cross_entropy(tf.logits, tf.labels, cfg.pad_id);
    };
    const auto rep = finite_difference_check(f, model.parameters(), 1e-5);
    check("gradient: one-layer generator", rep.max_rel_error < 1e-4);
  }
  {
    BleuOptions b1;
    b1.max_n = 1;
    const double b = bleu({tokenize("the cat")}, {tokenize("the cat sat")}, b1);
    check("metric oracle: bleu", std::fabs(b - 100.0 * std::exp(-0.5)) < 1e-4);
    check("metric oracle: rouge_l",
          std::fabs(rouge_l(tokenize("a b c"), tokenize("a c")) - 0.8) < 1e-4);
    check("metric oracle: ter",
          std::fabs(ter(tokenize("the cat sat down"), tokenize("the dog sat down")) - 25.0) <
              1e-4);
    ChrfOptions c1;
    c1.char_n = 1;
    check("metric oracle: chrf",
          std::fabs(chrf("abc", "abd", c1) - 100.0 * 2.0 / 3.0) < 1e-4);
  }
  {
    // POI loss against direct set arithmetic
    Rng rng(29);
    const std::vector<std::string> slot_pool{"poi",      "poitype", "poidistance",
                                             "poiaddress", "poidate", "poitime"};
    const SlotLexicon lexicon = SlotLexicon::defaults();
    bool ok = true;
    for (int t = 0; t < 200 && ok; ++t) {
      std::set<std::string> predicted, memory;
      for (const std::string& s : slot_pool) {
        if (rng.next_index(2)) predicted.insert(s);
        if (rng.next_index(2)) memory.insert(s);
      }
      std::vector<std::string> pred_tokens(predicted.begin(), predicted.end());
      std::vector<std::string> memory_items(memory.begin(), memory.end());
      const double loss = poi_loss(pred_tokens, memory_items, lexicon);
      int tp = 0;
      for (const std::string& s : predicted) tp += memory.count(s) ? 1 : 0;
      const int fp = static_cast<int>(predicted.size()) - tp;
      const int fn = static_cast<int>(memory.size()) - tp;
      const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
      const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
      const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      const double expected = memory.empty() ? 0.0 : 1.0 - f1;
      ok = std::fabs(loss - expected) < 1e-12;
    }
    check("poi loss vs set-count oracle", ok);
  }
  {
    ModelConfig cfg;
    cfg.vocab_size = 24;
    cfg.d_model = 8;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    cfg.max_seq_len = 12;
    cfg.max_memory_len = 12;
    cfg.feedforward_dim = 16;
    MemoryAugmentedTransformer full(cfg, 42);
    ModelConfig bare_cfg = cfg;
    bare_cfg.use_memory = false;
    MemoryAugmentedTransformer bare(bare_cfg, 1);
    auto bare_params = bare.parameters();
    for (NamedTensor& d : bare_params) {
      for (const NamedTensor& s : full.parameters()) {
        if (s.name == d.name) d.tensor.values() = s.tensor.values();
      }
    }
    Rng rng(31);
    bool ok = true;
    for (int t = 0; t < 20 && ok; ++t) {
      std::vector<int> ids;
      const int len = 1 + static_cast<int>(rng.next_index(8));
      for (int i = 0; i < len; ++i) ids.push_back(static_cast<int>(rng.next_index(24)));
      ok = full.encode(ids, {}).values() == bare.encode(ids, {}).values();
    }
    check("empty-memory equivalence", ok);
  }
  Tape::active().clear();
  return result;
}

}  // namespace gat
