#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gat/conditions.hpp"
#include "gat/errors.hpp"
#include "gat/tensor.hpp"
#include "gat/transformer.hpp"

namespace gat {

// Lowercases, separates punctuation into single-character tokens and splits
// on whitespace. Idempotent over its own space-joined output.
std::vector<std::string> tokenize(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary();

  // Unique corpus tokens sorted lexicographically after the reserved ids.
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_streams,
                          const std::vector<std::string>& extra_tokens = {":", "|"});
  static Vocabulary from_tokens(const std::vector<std::string>& all_tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id_or_unk(const std::string& token) const;
  // VocabularyError when the token is unknown.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens, int* unk_counter = nullptr) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// One (input utterance, external-memory items, target utterance) triple.
// memory_items are bare slot names ("poitype") or "name:value" facts.
struct DialogueTurn {
  std::string input_text;
  std::vector<std::string> memory_items;
  std::string target_text;
  std::string stage;  // "1" | "2" | "3" | "style"
  std::string scenario;

  bool operator==(const DialogueTurn&) const = default;
};

using KbEntry = std::map<std::string, std::string>;  // slot name -> value

struct KnowledgeBase {
  // scenario id -> entity rows, each a slot->value association
  std::map<std::string, std::vector<KbEntry>> scenarios;

  const std::vector<KbEntry>& entries(const std::string& scenario) const;
};

struct RawDialogue {
  std::string scenario;
  std::string question;
  std::string answer;
};

// Question words that translate to extremal KB lookups rather than literal
// value matches; all current entries minimize distance.
const std::map<std::string, std::string>& superlative_keywords();

struct Alignment {
  // ordered (value phrase, slot name) pairs as matched left to right
  std::vector<std::pair<std::string, std::string>> value_to_slot;
  bool empty() const { return value_to_slot.empty(); }
};

struct AttenuationResult {
  std::vector<std::string> tokens;
  Alignment alignment;
};

// Longest-match, left-to-right replacement of KB value phrases by their
// slot names (ties broken alphabetically on the slot), with superlative
// keywords mapping to their configured slot. Unmatched text passes through.
AttenuationResult attenuate(const std::string& utterance, const std::vector<KbEntry>& entries,
                            const std::map<std::string, std::string>& keywords =
                                superlative_keywords());

struct DataQualityReport {
  int dialogues = 0;
  int missing_kb = 0;
  int unmatched_questions = 0;
  int unmatched_answers = 0;
  int duplicates_removed = 0;
  int stage1_rows = 0;
  int stage2_rows = 0;
  int stage3_rows = 0;
  std::string to_json_string() const;
};

struct StageDatasets {
  std::vector<DialogueTurn> stage1;
  std::vector<DialogueTurn> stage2;
  std::vector<DialogueTurn> stage3;
  DataQualityReport report;
};

// The three-stage carve-up: slot detection (raw -> attenuated, no memory),
// slot mapping (attenuated question -> attenuated answer, memory = the
// question's slot names) and slot filling (attenuated answer -> original
// answer, memory = the resolved entry's name:value items). Each stage is
// deduplicated and sorted.
StageDatasets build_stage_datasets(const std::vector<RawDialogue>& dialogues,
                                   const KnowledgeBase& kb);

// ---- corpus files (UTF-8, line-delimited JSON records) ----

std::vector<DialogueTurn> load_turns(const std::string& path);
void save_turns(const std::string& path, const std::vector<DialogueTurn>& turns);
KnowledgeBase load_kb(const std::string& path);
void save_kb(const std::string& path, const KnowledgeBase& kb);

// Style corpus rows must carry a [gender, age] profile as memory items.
std::vector<DialogueTurn> load_style_corpus(const std::string& path);

// Deterministic exact partition; test size = round(fraction * N).
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& dataset,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  if (dataset.size() < 5) {
    throw ConfigurationError("dataset of size " + std::to_string(dataset.size()) +
                             " is too small to split (need at least 5 rows)");
  }
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = rng.next_index(i + 1);
    std::swap(order[i], order[j]);
  }
  const std::size_t test_size =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(dataset.size())));
  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < test_size ? out.second : out.first).push_back(dataset[order[i]]);
  }
  return out;
}

struct EncodedTurn {
  std::vector<int> input_ids;
  std::vector<int> memory_ids;
  std::vector<int> target_ids;  // BOS ... EOS
};

struct EncodeStats {
  int unknown_tokens = 0;
  int truncated_sequences = 0;
};

std::vector<int> encode_memory_items(const std::vector<std::string>& items,
                                     const Vocabulary& vocab, int* unk_counter = nullptr);
EncodedTurn encode_turn(const DialogueTurn& turn, const Vocabulary& vocab,
                        const ModelConfig& config, EncodeStats* stats = nullptr);

// ---- bundled synthetic corpora ----

struct SyntheticCarCorpus {
  std::vector<RawDialogue> dialogues;
  KnowledgeBase kb;
};

// Template-generated navigation and calendar dialogues over a small KB with
// known ground truth; every answer is the deterministic fill of its
// question's resolved entry. Scenario 0 always contains the parking-garage
// route dialogue used as the canonical worked example.
SyntheticCarCorpus make_synthetic_car_corpus(int scenario_count, std::uint64_t seed);

// Profile-conditioned single-turn corpus: each question appears once per
// profile with a profile-specific answer style.
std::vector<DialogueTurn> make_synthetic_style_corpus(int turns, std::uint64_t seed);

}  // namespace gat
