#include "gat/conditions.hpp"

#include <algorithm>
#include <fstream>

#include "gat/data.hpp"

namespace gat {

SlotLexicon SlotLexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open lexicon file: " + path);
  SlotLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lex.names.insert(line);
  }
  if (lex.names.empty()) throw IngestionError("lexicon file holds no slot names: " + path);
  return lex;
}

SlotLexicon SlotLexicon::defaults() {
  return SlotLexicon{{"poi", "poitype", "poidistance", "poiaddress", "poievent", "poidate",
                      "poitime", "poiparty", "poiagenda", "poitrafficinfo"}};
}

SlotIdLexicon bind_lexicon(const SlotLexicon& lexicon, const Vocabulary& vocab) {
  SlotIdLexicon bound;
  for (const std::string& name : lexicon.names) {
    const int id = vocab.id_or_unk(name);
    if (id != Vocabulary::kUnk) bound.ids.insert(id);
  }
  bound.colon_id = vocab.id_or_unk(":") == Vocabulary::kUnk ? -1 : vocab.id_or_unk(":");
  bound.separator_id = vocab.id_or_unk("|") == Vocabulary::kUnk ? -1 : vocab.id_or_unk("|");
  return bound;
}

namespace {

// Shared scan over either plain utterances or name:value memory encodings.
// In structured sequences only name-part positions (before the colon of the
// current item) may contribute slot names.
template <typename Id, typename Contains, typename ColonPred, typename SepPred>
std::set<Id> scan_slots(const std::vector<Id>& seq, Contains in_lexicon, ColonPred is_colon,
                        SepPred is_separator) {
  bool structured = false;
  for (const Id& t : seq) {
    if (is_colon(t)) {
      structured = true;
      break;
    }
  }
  std::set<Id> found;
  bool in_value = false;
  for (const Id& t : seq) {
    if (structured) {
      if (is_colon(t)) {
        in_value = true;
        continue;
      }
      if (is_separator(t)) {
        in_value = false;
        continue;
      }
      if (in_value) continue;
    }
    if (in_lexicon(t)) found.insert(t);
  }
  return found;
}

}  // namespace

std::set<std::string> extract_slot_names(const std::vector<std::string>& tokens,
                                         const SlotLexicon& lexicon) {
  return scan_slots<std::string>(
      tokens, [&](const std::string& t) { return lexicon.contains(t); },
      [](const std::string& t) { return t == ":"; },
      [](const std::string& t) { return t == "|"; });
}

std::set<int> extract_slot_names(const std::vector<int>& ids, const SlotIdLexicon& lexicon) {
  return scan_slots<int>(
      ids, [&](int t) { return lexicon.ids.count(t) > 0; },
      [&](int t) { return lexicon.colon_id >= 0 && t == lexicon.colon_id; },
      [&](int t) { return lexicon.separator_id >= 0 && t == lexicon.separator_id; });
}

std::set<std::string> memory_slot_names(const std::vector<std::string>& memory_items,
                                        const SlotLexicon& lexicon) {
  std::set<std::string> names;
  for (const std::string& item : memory_items) {
    const std::string name = item.substr(0, item.find(':'));
    if (lexicon.contains(name)) names.insert(name);
  }
  return names;
}

double poi_loss(const std::vector<int>& predicted_ids, const std::vector<int>& memory_ids,
                const SlotIdLexicon& lexicon) {
  const std::set<int> memory = extract_slot_names(memory_ids, lexicon);
  if (memory.empty()) return 0.0;
  const std::set<int> predicted = extract_slot_names(predicted_ids, lexicon);
  return 1.0 - poi_f1(predicted, memory).f1;
}

double poi_loss(const std::vector<std::string>& predicted_tokens,
                const std::vector<std::string>& memory_items, const SlotLexicon& lexicon) {
  const std::set<std::string> memory = memory_slot_names(memory_items, lexicon);
  if (memory.empty()) return 0.0;
  const std::set<std::string> predicted = extract_slot_names(predicted_tokens, lexicon);
  return 1.0 - poi_f1(predicted, memory).f1;
}

Tensor poi_loss_soft(const Tensor& distributions, const std::vector<int>& memory_ids,
                     const SlotIdLexicon& lexicon) {
  const std::set<int> memory = extract_slot_names(memory_ids, lexicon);
  if (memory.empty()) return Tensor::scalar(0.0);

  std::vector<int> all_slots(lexicon.ids.begin(), lexicon.ids.end());
  std::sort(all_slots.begin(), all_slots.end());

  Tensor tp = Tensor::scalar(0.0);
  Tensor fp = Tensor::scalar(0.0);
  for (int slot : all_slots) {
    if (slot >= distributions.dim(1)) continue;
    Tensor presence = column_max(distributions, slot);
    if (memory.count(slot)) {
      tp = add(tp, presence);
    } else {
      fp = add(fp, presence);
    }
  }
  // softmax mass is strictly positive, so tp > 0 and the ratios are safe
  Tensor precision = div(tp, add(tp, fp));
  Tensor recall = affine(tp, 1.0 / static_cast<double>(memory.size()), 0.0);
  Tensor f1 = div(affine(mul(precision, recall), 2.0, 0.0), add(precision, recall));
  return affine(f1, -1.0, 1.0);
}

ConditionLoss zero_condition() {
  ConditionLoss c;
  c.name = "zero";
  c.hard = [](const std::vector<int>&, const std::vector<int>&) { return 0.0; };
  c.soft = nullptr;
  return c;
}

ConditionLoss poi_condition(const SlotIdLexicon& lexicon, bool differentiable) {
  ConditionLoss c;
  c.name = "poi";
  c.hard = [lexicon](const std::vector<int>& predicted, const std::vector<int>& memory) {
    return poi_loss(predicted, memory, lexicon);
  };
  if (differentiable) {
    c.soft = [lexicon](const Tensor& distributions, const std::vector<int>& memory) {
      return poi_loss_soft(distributions, memory, lexicon);
    };
  }
  return c;
}

}  // namespace gat
