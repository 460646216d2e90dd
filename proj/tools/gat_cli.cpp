#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gat/runner.hpp"

namespace fs = std::filesystem;
using namespace gat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int cmd_prepare(const std::string& corpus_path, const std::string& kb_path,
                const std::string& out_dir, const std::string& synthetic, int scenarios,
                int style_turns, std::uint64_t seed) {
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  if (synthetic == "style") {
    const auto rows = make_synthetic_style_corpus(style_turns, seed);
    save_turns((out / "style.jsonl").string(), rows);
    std::cout << "wrote " << rows.size() << " style turns to " << (out / "style.jsonl").string()
              << "\n";
    return kExitOk;
  }

  std::vector<RawDialogue> dialogues;
  KnowledgeBase kb;
  if (synthetic == "car") {
    SyntheticCarCorpus corpus = make_synthetic_car_corpus(scenarios, seed);
    dialogues = std::move(corpus.dialogues);
    kb = std::move(corpus.kb);
    save_kb((out / "kb.jsonl").string(), kb);
    std::ofstream raw(out / "dialogues.jsonl");
    for (const RawDialogue& d : dialogues) {
      raw << nlohmann::json{{"scenario", d.scenario},
                            {"question", d.question},
                            {"answer", d.answer}}
                 .dump()
          << "\n";
    }
  } else {
    if (corpus_path.empty() || !fs::exists(corpus_path)) {
      std::cerr << "error: corpus file not found: " << corpus_path << "\n";
      return kExitData;
    }
    if (kb_path.empty() || !fs::exists(kb_path)) {
      std::cerr << "error: KB file not found: " << kb_path << "\n";
      return kExitData;
    }
    std::ifstream in(corpus_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        dialogues.push_back({j.at("scenario").get<std::string>(),
                             j.at("question").get<std::string>(),
                             j.at("answer").get<std::string>()});
      } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: dialogue record " << line_no << " is malformed: " << e.what()
                  << "\n";
        return kExitData;
      }
    }
    kb = load_kb(kb_path);
  }
  if (dialogues.empty()) {
    std::cerr << "error: no dialogues to stage\n";
    return kExitData;
  }

  StageDatasets stages = build_stage_datasets(dialogues, kb);
  save_turns((out / "stage1.jsonl").string(), stages.stage1);
  save_turns((out / "stage2.jsonl").string(), stages.stage2);
  save_turns((out / "stage3.jsonl").string(), stages.stage3);
  std::ofstream(out / "quality_report.json") << stages.report.to_json_string() << "\n";
  std::cout << "stage1: " << stages.stage1.size() << " rows\n"
            << "stage2: " << stages.stage2.size() << " rows\n"
            << "stage3: " << stages.stage3.size() << " rows\n"
            << "quality report: " << (out / "quality_report.json").string() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path) {
  RunConfig config = RunConfig::from_file(config_path);
  TrainResult result = run_training(config);
  std::cout << "trained " << result.epochs.size() << " epochs; best epoch "
            << result.best_epoch << " (val standard loss " << result.best_val_standard
            << ")\n"
            << "best checkpoint:  " << result.best_checkpoint << "\n"
            << "final checkpoint: " << result.final_checkpoint << "\n"
            << "metrics log:      " << result.metrics_file << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& test_file,
                 const std::string& baseline, const std::string& out_dir, bool ablation,
                 int resamples, std::uint64_t seed, const std::string& lexicon) {
  EvaluationArtifacts artifacts = evaluate_checkpoint(checkpoint, test_file, baseline, out_dir,
                                                      ablation, resamples, seed, lexicon);
  std::cout << artifacts.report.to_json_string() << "\n";
  if (!artifacts.report_file.empty()) {
    std::cout << "report written to " << artifacts.report_file << "\n";
  }
  return kExitOk;
}

int cmd_generate(const std::string& checkpoint, const std::string& input_file,
                 const std::string& out_file, bool ablation) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocab_tokens);
  MemoryAugmentedTransformer model(ckpt.config, 0);
  apply_checkpoint(model, ckpt);

  const std::vector<DialogueTurn> turns = load_turns(input_file);
  std::ostream* out = &std::cout;
  std::ofstream file_out;
  if (!out_file.empty()) {
    file_out.open(out_file);
    out = &file_out;
  }
  for (const DialogueTurn& t : turns) {
    EncodedTurn enc = encode_turn(t, vocab, ckpt.config);
    if (ablation) enc.memory_ids.clear();
    const std::vector<int> ids =
        model.generate(enc.input_ids, enc.memory_ids, ckpt.config.max_seq_len - 1);
    *out << join_tokens(vocab.decode(ids)) << "\n";
  }
  return kExitOk;
}

int cmd_pipeline(const std::string& questions_file, const std::string& kb_file,
                 const std::string& s1, const std::string& s2, const std::string& s3,
                 const std::string& out_file, const std::string& lexicon_file) {
  const Checkpoint c1 = load_checkpoint(s1);
  const Checkpoint c2 = load_checkpoint(s2);
  const Checkpoint c3 = load_checkpoint(s3);
  if (c1.vocab_tokens != c2.vocab_tokens || c1.vocab_tokens != c3.vocab_tokens) {
    throw CompatibilityError("the three stage checkpoints must share one vocabulary");
  }
  const Vocabulary vocab = Vocabulary::from_tokens(c1.vocab_tokens);
  MemoryAugmentedTransformer m1(c1.config, 0), m2(c2.config, 0), m3(c3.config, 0);
  apply_checkpoint(m1, c1);
  apply_checkpoint(m2, c2);
  apply_checkpoint(m3, c3);
  const KnowledgeBase kb = load_kb(kb_file);
  const SlotLexicon lexicon =
      lexicon_file.empty() ? SlotLexicon::defaults() : SlotLexicon::from_file(lexicon_file);

  std::ifstream in(questions_file);
  if (!in) {
    std::cerr << "error: cannot open questions file: " << questions_file << "\n";
    return kExitData;
  }
  std::ostream* out = &std::cout;
  std::ofstream file_out;
  if (!out_file.empty()) {
    file_out.open(out_file);
    out = &file_out;
  }
  StageModels models{&m1, &m2, &m3, &vocab};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string question, scenario;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      question = j.at("question").get<std::string>();
      scenario = j.at("scenario").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: question record " << line_no << " is malformed: " << e.what() << "\n";
      return kExitData;
    }
    PipelineTrace trace =
        run_three_stage(question, kb.entries(scenario), models, lexicon);
    *out << trace.to_json_string() << "\n";
  }
  return kExitOk;
}

int cmd_selfcheck() {
  SelfCheckResult result = run_selfcheck();
  for (const auto& [name, passed] : result.checks) {
    std::cout << (passed ? "[PASS] " : "[FAIL] ") << name << "\n";
  }
  std::cout << (result.all_passed ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return result.all_passed ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-augmented adversarial transformer toolkit"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "stage a dialogue corpus (or emit synthetic data)");
  std::string corpus_path, kb_path, prepare_out = "data", synthetic;
  int scenarios = 18, style_turns = 500;
  std::uint64_t prepare_seed = 11;
  prepare->add_option("--corpus", corpus_path, "raw dialogues (JSONL: scenario/question/answer)");
  prepare->add_option("--kb", kb_path, "knowledge base (JSONL: scenario/entries)");
  prepare->add_option("--out", prepare_out, "output directory")->capture_default_str();
  prepare->add_option("--synthetic", synthetic, "emit the bundled synthetic corpus: car | style")
      ->check(CLI::IsMember({"car", "style"}));
  prepare->add_option("--scenarios", scenarios, "synthetic car scenario count")
      ->capture_default_str();
  prepare->add_option("--style-turns", style_turns, "synthetic style corpus size")
      ->capture_default_str();
  prepare->add_option("--seed", prepare_seed, "synthetic generator seed")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train one stage/task from a JSON run config");
  std::string config_path;
  train->add_option("config", config_path, "run config JSON file")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a test corpus");
  std::string eval_ckpt, eval_test, eval_baseline, eval_out, eval_lexicon;
  bool eval_ablation = false;
  int resamples = 1000;
  std::uint64_t eval_seed = 42;
  evaluate->add_option("checkpoint", eval_ckpt)->required();
  evaluate->add_option("test_file", eval_test)->required();
  evaluate->add_option("--baseline", eval_baseline, "aligned baseline predictions (text lines)");
  evaluate->add_option("--out", eval_out, "directory for report.json + predictions.txt");
  evaluate->add_flag("--memory-ablation", eval_ablation, "empty every memory buffer");
  evaluate->add_option("--resamples", resamples)->capture_default_str();
  evaluate->add_option("--seed", eval_seed)->capture_default_str();
  evaluate->add_option("--lexicon", eval_lexicon, "slot lexicon file (one token per line)");

  // generate
  auto* generate = app.add_subcommand("generate", "greedy-decode a corpus with a checkpoint");
  std::string gen_ckpt, gen_input, gen_out;
  bool gen_ablation = false;
  generate->add_option("checkpoint", gen_ckpt)->required();
  generate->add_option("input_file", gen_input, "turn records (JSONL)")->required();
  generate->add_option("--out", gen_out, "write generations here instead of stdout");
  generate->add_flag("--memory-ablation", gen_ablation);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run the three-stage factual QA pipeline");
  std::string pipe_questions, pipe_kb, pipe_s1, pipe_s2, pipe_s3, pipe_out, pipe_lexicon;
  pipeline->add_option("questions", pipe_questions, "JSONL: {question, scenario}")->required();
  pipeline->add_option("--kb", pipe_kb)->required();
  pipeline->add_option("--stage1", pipe_s1)->required();
  pipeline->add_option("--stage2", pipe_s2)->required();
  pipeline->add_option("--stage3", pipe_s3)->required();
  pipeline->add_option("--out", pipe_out, "trace output file (JSONL)");
  pipeline->add_option("--lexicon", pipe_lexicon);

  // selfcheck
  app.add_subcommand("selfcheck", "run gradient checks and metric oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) {
      return cmd_prepare(corpus_path, kb_path, prepare_out, synthetic, scenarios, style_turns,
                         prepare_seed);
    }
    if (train->parsed()) return cmd_train(config_path);
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_ckpt, eval_test, eval_baseline, eval_out, eval_ablation,
                          resamples, eval_seed, eval_lexicon);
    }
    if (generate->parsed()) return cmd_generate(gen_ckpt, gen_input, gen_out, gen_ablation);
    if (pipeline->parsed()) {
      return cmd_pipeline(pipe_questions, pipe_kb, pipe_s1, pipe_s2, pipe_s3, pipe_out,
                          pipe_lexicon);
    }
    if (app.get_subcommand("selfcheck")->parsed()) return cmd_selfcheck();
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IngestionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CompatibilityError& e) {
    std::cerr << "compatibility error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateBatchError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const GatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
