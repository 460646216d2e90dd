#include "gat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <json.hpp>

namespace gat {

KbQuery construct_kb_query(const Alignment& alignment,
                           const std::map<std::string, std::string>& keywords) {
  if (alignment.empty()) {
    throw QueryError("question has no resolvable slots");
  }
  KbQuery query;
  // equality filters first, then superlative selectors
  for (const auto& [value, slot] : alignment.value_to_slot) {
    if (keywords.count(value)) continue;
    query.constraints.push_back({slot, Comparator::equals, value});
  }
  for (const auto& [value, slot] : alignment.value_to_slot) {
    if (!keywords.count(value)) continue;
    query.constraints.push_back({slot, Comparator::superlative, value});
  }
  return query;
}

namespace {

// "4 miles" -> 4; returns nullopt when the value has no leading number
std::optional<double> leading_number(const std::string& value) {
  std::size_t pos = 0;
  try {
    const double parsed = std::stod(value, &pos);
    if (pos == 0) return std::nullopt;
    return parsed;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<std::string> resolve_query(const KbQuery& query,
                                       const std::vector<KbEntry>& entries) {
  if (query.constraints.empty()) throw QueryError("query has no constraints");
  std::vector<const KbEntry*> candidates;
  for (const KbEntry& entry : entries) candidates.push_back(&entry);

  for (const KbConstraint& c : query.constraints) {
    if (c.comparator != Comparator::equals) continue;
    std::vector<const KbEntry*> kept;
    for (const KbEntry* entry : candidates) {
      auto it = entry->find(c.slot);
      if (it != entry->end() && it->second == c.operand) kept.push_back(entry);
    }
    candidates = std::move(kept);
  }
  for (const KbConstraint& c : query.constraints) {
    if (c.comparator != Comparator::superlative) continue;
    const KbEntry* best = nullptr;
    for (const KbEntry* entry : candidates) {
      auto it = entry->find(c.slot);
      if (it == entry->end()) continue;
      if (best == nullptr) {
        best = entry;
        continue;
      }
      const std::string& value = it->second;
      const std::string& best_value = best->at(c.slot);
      const auto num = leading_number(value);
      const auto best_num = leading_number(best_value);
      if (num && best_num ? *num < *best_num : value < best_value) best = entry;
    }
    candidates.clear();
    if (best != nullptr) candidates.push_back(best);
  }

  if (candidates.empty()) {
    throw ResolutionError("no KB entry satisfies the query");
  }
  std::vector<std::string> items;
  for (const auto& [slot, value] : *candidates.front()) items.push_back(slot + ":" + value);
  return items;
}

FillResult fill_slots_deterministic(const std::vector<std::string>& template_tokens,
                                    const std::vector<std::string>& memory_items) {
  std::map<std::string, std::string> values;
  for (const std::string& item : memory_items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) continue;  // bare slot names carry no value
    values[item.substr(0, colon)] = item.substr(colon + 1);
  }
  const SlotLexicon lexicon = SlotLexicon::defaults();
  FillResult out;
  for (const std::string& token : template_tokens) {
    auto it = values.find(token);
    if (it != values.end()) {
      for (const std::string& vt : tokenize(it->second)) out.tokens.push_back(vt);
    } else {
      if (lexicon.contains(token)) ++out.unmatched_slots;
      out.tokens.push_back(token);
    }
  }
  return out;
}

namespace {

// Splits one replaced span across its slot tokens: superlative keywords
// claim their word, KB value phrases claim longest matches, and a sole
// trailing slot takes the remainder.
bool split_multi_slot_segment(const std::vector<std::string>& span,
                              const std::vector<std::string>& slots,
                              const std::vector<KbEntry>& entries,
                              const std::map<std::string, std::string>& keywords,
                              Alignment& alignment) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t cursor = 0;
  for (std::size_t idx = 0; idx < slots.size(); ++idx) {
    if (cursor >= span.size()) return false;
    const std::string& slot = slots[idx];
    auto kw = keywords.find(span[cursor]);
    if (kw != keywords.end() && kw->second == slot) {
      pairs.emplace_back(span[cursor], slot);
      ++cursor;
      continue;
    }
    std::size_t best_len = 0;
    std::string best_phrase;
    for (const KbEntry& entry : entries) {
      auto it = entry.find(slot);
      if (it == entry.end()) continue;
      const std::vector<std::string> value_tokens = tokenize(it->second);
      if (value_tokens.empty() || value_tokens.size() > span.size() - cursor) continue;
      if (!std::equal(value_tokens.begin(), value_tokens.end(), span.begin() + static_cast<std::ptrdiff_t>(cursor))) continue;
      if (value_tokens.size() > best_len) {
        best_len = value_tokens.size();
        best_phrase = it->second;
      }
    }
    if (best_len > 0) {
      pairs.emplace_back(best_phrase, slot);
      cursor += best_len;
      continue;
    }
    if (idx + 1 == slots.size()) {
      pairs.emplace_back(
          join_tokens(std::vector<std::string>(span.begin() + static_cast<std::ptrdiff_t>(cursor),
                                               span.end())),
          slot);
      cursor = span.size();
      continue;
    }
    return false;
  }
  for (auto& p : pairs) alignment.value_to_slot.push_back(std::move(p));
  return true;
}

}  // namespace

Alignment recover_alignment(const std::vector<std::string>& original_tokens,
                            const std::vector<std::string>& attenuated_tokens,
                            const SlotLexicon& lexicon, const std::vector<KbEntry>& entries,
                            const std::map<std::string, std::string>& keywords) {
  // LCS over exact tokens; between consecutive anchors, the original span
  // is the value phrase the slot token(s) replaced
  const std::size_t m = original_tokens.size(), n = attenuated_tokens.size();
  std::vector<std::vector<int>> lcs(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = m; i-- > 0;) {
    for (std::size_t j = n; j-- > 0;) {
      lcs[i][j] = original_tokens[i] == attenuated_tokens[j]
                      ? lcs[i + 1][j + 1] + 1
                      : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> anchors;
  std::size_t i = 0, j = 0;
  while (i < m && j < n) {
    if (original_tokens[i] == attenuated_tokens[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
      anchors.emplace_back(i, j);
      ++i;
      ++j;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  anchors.emplace_back(m, n);  // sentinel closes the final segment

  Alignment alignment;
  std::size_t prev_i = 0, prev_j = 0;
  for (const auto& [ai, aj] : anchors) {
    std::vector<std::string> replaced(
        original_tokens.begin() + static_cast<std::ptrdiff_t>(prev_i),
        original_tokens.begin() + static_cast<std::ptrdiff_t>(ai));
    std::vector<std::string> slots;
    for (std::size_t t = prev_j; t < aj; ++t) {
      if (lexicon.contains(attenuated_tokens[t])) slots.push_back(attenuated_tokens[t]);
    }
    if (slots.size() == 1 && !replaced.empty()) {
      alignment.value_to_slot.emplace_back(join_tokens(replaced), slots[0]);
    } else if (slots.size() > 1 &&
               !split_multi_slot_segment(replaced, slots, entries, keywords, alignment)) {
      if (slots.size() == replaced.size()) {
        for (std::size_t t = 0; t < slots.size(); ++t) {
          alignment.value_to_slot.emplace_back(replaced[t], slots[t]);
        }
      }
    }
    prev_i = ai + 1;
    prev_j = aj + 1;
  }
  return alignment;
}

std::string PipelineTrace::to_json_string() const {
  nlohmann::json constraints = nlohmann::json::array();
  for (const KbConstraint& c : query.constraints) {
    constraints.push_back({{"slot", c.slot},
                           {"comparator", c.comparator == Comparator::equals ? "equals"
                                                                             : "superlative"},
                           {"operand", c.operand}});
  }
  nlohmann::json j{{"question", question},
                   {"stage1_output", stage1_output},
                   {"query", constraints},
                   {"resolved_memory", resolved_memory},
                   {"stage2_output", stage2_output},
                   {"stage3_output", stage3_output},
                   {"answer", answer},
                   {"ok", ok},
                   {"artifacts", artifacts}};
  if (!error.empty()) j["error"] = error;
  return j.dump();
}

PipelineTrace run_three_stage(const std::string& question, const std::vector<KbEntry>& entries,
                              const StageModels& models, const SlotLexicon& lexicon,
                              int max_len) {
  PipelineTrace trace;
  trace.question = question;
  const Vocabulary& vocab = *models.vocab;
  const std::string fallback = "i could not find that information";

  const std::vector<std::string> q_tokens = tokenize(question);
  const std::vector<int> q_ids = vocab.encode(q_tokens);

  // stage 1: slot detection with an empty memory bank
  const std::vector<int> s1_ids = models.stage1->generate(q_ids, {}, max_len);
  const std::vector<std::string> s1_tokens = vocab.decode(s1_ids);
  trace.stage1_output = join_tokens(s1_tokens);
  trace.artifacts.push_back(trace.stage1_output);

  const Alignment alignment = recover_alignment(q_tokens, s1_tokens, lexicon, entries);
  try {
    trace.query = construct_kb_query(alignment);
  } catch (const QueryError& e) {
    trace.error = e.what();
    trace.answer = fallback;
    return trace;
  }
  {
    std::string rendered;
    for (const KbConstraint& c : trace.query.constraints) {
      if (!rendered.empty()) rendered += ", ";
      rendered += c.slot + (c.comparator == Comparator::equals ? " equals " : " superlative ") +
                  c.operand;
    }
    trace.artifacts.push_back(rendered);
  }

  try {
    trace.resolved_memory = resolve_query(trace.query, entries);
  } catch (const ResolutionError& e) {
    trace.error = e.what();
    trace.answer = fallback;
    return trace;
  }
  {
    std::string rendered;
    for (const std::string& item : trace.resolved_memory) {
      if (!rendered.empty()) rendered += ", ";
      rendered += item;
    }
    trace.artifacts.push_back(rendered);
  }

  // stage 2: slot mapping with the question's slot names as emphasis memory
  std::vector<std::string> emphasis;
  for (const std::string& tok : s1_tokens) {
    if (lexicon.contains(tok) &&
        std::find(emphasis.begin(), emphasis.end(), tok) == emphasis.end()) {
      emphasis.push_back(tok);
    }
  }
  const std::vector<int> s2_ids =
      models.stage2->generate(s1_ids, encode_memory_items(emphasis, vocab), max_len);
  trace.stage2_output = join_tokens(vocab.decode(s2_ids));
  trace.artifacts.push_back(trace.stage2_output);

  // stage 3: slot filling with the resolved name:value facts
  const std::vector<int> s3_ids =
      models.stage3->generate(s2_ids, encode_memory_items(trace.resolved_memory, vocab), max_len);
  trace.stage3_output = join_tokens(vocab.decode(s3_ids));
  trace.artifacts.push_back(trace.stage3_output);

  trace.answer = trace.stage3_output;
  trace.ok = true;
  return trace;
}

}  // namespace gat
