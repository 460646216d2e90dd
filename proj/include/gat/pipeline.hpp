#pragma once

#include <string>
#include <vector>

#include "gat/conditions.hpp"
#include "gat/data.hpp"
#include "gat/transformer.hpp"

namespace gat {

enum class Comparator { equals, superlative };

struct KbConstraint {
  std::string slot;
  Comparator comparator = Comparator::equals;
  std::string operand;  // value phrase for equals, source word for superlative

  bool operator==(const KbConstraint&) const = default;
};

struct KbQuery {
  std::vector<KbConstraint> constraints;
};

// One constraint per aligned slot: superlative source words become
// superlative comparators, everything else equality filters.
KbQuery construct_kb_query(const Alignment& alignment,
                           const std::map<std::string, std::string>& keywords =
                               superlative_keywords());

// Filters scenario entries by the equality constraints, then lets
// superlative constraints pick the extremal entry (numeric-minimal where
// the value parses, lexicographic otherwise). Returns the chosen entry as
// name:value memory items.
std::vector<std::string> resolve_query(const KbQuery& query,
                                       const std::vector<KbEntry>& entries);

struct FillResult {
  std::vector<std::string> tokens;
  int unmatched_slots = 0;  // slot-name tokens with no memory entry
};

// Replaces every token matching a memory slot name with that slot's value
// tokens; the oracle counterpart of the learned stage-3 model.
FillResult fill_slots_deterministic(const std::vector<std::string>& template_tokens,
                                    const std::vector<std::string>& memory_items);

// Recovers the (value phrase -> slot) alignment between an original
// utterance and its attenuated counterpart by anchoring on the tokens the
// attenuation left untouched. Spans replaced by several slot tokens are
// segmented with the superlative keyword table and, when given, the
// scenario's KB value phrases.
Alignment recover_alignment(const std::vector<std::string>& original_tokens,
                            const std::vector<std::string>& attenuated_tokens,
                            const SlotLexicon& lexicon,
                            const std::vector<KbEntry>& entries = {},
                            const std::map<std::string, std::string>& keywords =
                                superlative_keywords());

struct StageModels {
  const MemoryAugmentedTransformer* stage1 = nullptr;
  const MemoryAugmentedTransformer* stage2 = nullptr;
  const MemoryAugmentedTransformer* stage3 = nullptr;
  const Vocabulary* vocab = nullptr;
};

struct PipelineTrace {
  std::string question;
  std::string stage1_output;
  KbQuery query;
  std::vector<std::string> resolved_memory;
  std::string stage2_output;
  std::string stage3_output;
  std::string answer;
  bool ok = false;
  std::string error;
  // the stage artifacts in order, for the happy path exactly five
  std::vector<std::string> artifacts;
  std::string to_json_string() const;
};

// Slot detection -> KB query -> slot mapping (emphasis memory) -> slot
// filling (value memory). Query or resolution failures produce a fallback
// answer and a flagged trace instead of an exception.
PipelineTrace run_three_stage(const std::string& question, const std::vector<KbEntry>& entries,
                              const StageModels& models, const SlotLexicon& lexicon,
                              int max_len = 24);

}  // namespace gat
