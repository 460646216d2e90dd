#pragma once

#include <functional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "gat/tensor.hpp"

namespace gat {

class Vocabulary;

// Slot-name tokens known to the POI machinery, e.g. poitype, poidistance.
struct SlotLexicon {
  std::set<std::string> names;

  bool contains(const std::string& token) const { return names.count(token) > 0; }
  static SlotLexicon from_file(const std::string& path);
  // The in-car assistant slot set used throughout the corpus tooling.
  static SlotLexicon defaults();
};

// Lexicon resolved against a vocabulary so slot extraction can run on id
// sequences during training.
struct SlotIdLexicon {
  std::unordered_set<int> ids;
  int colon_id = -1;
  int separator_id = -1;
};

SlotIdLexicon bind_lexicon(const SlotLexicon& lexicon, const Vocabulary& vocab);

// Deduplicated lexicon tokens occurring in the sequence. Sequences holding
// name:value structure (a colon token present) count only name positions,
// so slot names inside values are ignored.
std::set<std::string> extract_slot_names(const std::vector<std::string>& tokens,
                                         const SlotLexicon& lexicon);
std::set<int> extract_slot_names(const std::vector<int>& ids, const SlotIdLexicon& lexicon);

// Slot names of a memory item list (items are "name" or "name:value").
std::set<std::string> memory_slot_names(const std::vector<std::string>& memory_items,
                                        const SlotLexicon& lexicon);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set-based precision/recall/F1 with every 0/0 ratio defined as 0.
template <typename T>
PrecisionRecallF1 poi_f1(const std::set<T>& predicted, const std::set<T>& memory) {
  int tp = 0;
  for (const T& s : predicted) {
    if (memory.count(s)) ++tp;
  }
  const int fp = static_cast<int>(predicted.size()) - tp;
  const int fn = static_cast<int>(memory.size()) - tp;
  PrecisionRecallF1 r;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

// 1 - F1 over extracted slot-name sets; 0 when the memory names no slots
// (nothing to enforce).
double poi_loss(const std::vector<int>& predicted_ids, const std::vector<int>& memory_ids,
                const SlotIdLexicon& lexicon);
double poi_loss(const std::vector<std::string>& predicted_tokens,
                const std::vector<std::string>& memory_items, const SlotLexicon& lexicon);

// Differentiable relaxation: each slot's presence is the maximum softmax
// mass its token receives over positions; TP/FP/FN become sums of those
// presences, and the loss is 1 - softF1. Reduces to the set version on
// one-hot rows.
Tensor poi_loss_soft(const Tensor& distributions, const std::vector<int>& memory_ids,
                     const SlotIdLexicon& lexicon);

// Pluggable generator condition: the hard form scores greedy token ids and
// enters the composed loss as a scalar; the soft form, when present, is a
// differentiable tensor term.
struct ConditionLoss {
  std::string name;
  std::function<double(const std::vector<int>& predicted_ids,
                       const std::vector<int>& memory_ids)>
      hard;
  std::function<Tensor(const Tensor& distributions, const std::vector<int>& memory_ids)> soft;
};

// The default lambda*: identically zero.
ConditionLoss zero_condition();
ConditionLoss poi_condition(const SlotIdLexicon& lexicon, bool differentiable);

}  // namespace gat
