#include "gat/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gat {

namespace {
constexpr const char* kPunct = ".,!?;:'\"()|";
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string spaced;
  spaced.reserve(text.size() * 2);
  for (char ch : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (std::strchr(kPunct, c) != nullptr) {
      spaced.push_back(' ');
      spaced.push_back(c);
      spaced.push_back(' ');
    } else {
      spaced.push_back(c);
    }
  }
  std::vector<std::string> tokens;
  std::istringstream in(spaced);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// ---- vocabulary ----

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (int i = 0; i < 4; ++i) index_[tokens_[static_cast<std::size_t>(i)]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_streams,
                             const std::vector<std::string>& extra_tokens) {
  std::set<std::string> unique(extra_tokens.begin(), extra_tokens.end());
  for (const auto& stream : token_streams) unique.insert(stream.begin(), stream.end());
  Vocabulary v;
  for (const std::string& t : unique) {
    if (v.index_.count(t)) continue;
    v.index_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(t);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& all_tokens) {
  if (all_tokens.size() < 4) {
    throw CompatibilityError("vocabulary token list is missing the reserved entries");
  }
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (const std::string& t : all_tokens) {
    v.index_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(t);
  }
  return v;
}

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw VocabularyError("unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens,
                                    int* unk_counter) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) {
    const int id = id_or_unk(t);
    if (id == kUnk && unk_counter != nullptr) ++*unk_counter;
    ids.push_back(id);
  }
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int id : ids) tokens.push_back(token(id));
  return tokens;
}

// ---- knowledge base ----

const std::vector<KbEntry>& KnowledgeBase::entries(const std::string& scenario) const {
  static const std::vector<KbEntry> empty;
  auto it = scenarios.find(scenario);
  return it == scenarios.end() ? empty : it->second;
}

const std::map<std::string, std::string>& superlative_keywords() {
  static const std::map<std::string, std::string> keywords = {
      {"nearest", "poidistance"}, {"closest", "poidistance"},  {"fastest", "poidistance"},
      {"quickest", "poidistance"}, {"shortest", "poidistance"},
  };
  return keywords;
}

// ---- attenuation ----

AttenuationResult attenuate(const std::string& utterance, const std::vector<KbEntry>& entries,
                            const std::map<std::string, std::string>& keywords) {
  struct Candidate {
    std::vector<std::string> value_tokens;
    std::string slot;
    std::string value;
  };
  std::vector<Candidate> candidates;
  for (const KbEntry& entry : entries) {
    for (const auto& [slot, value] : entry) {
      Candidate c{tokenize(value), slot, value};
      if (c.value_tokens.empty()) continue;
      bool seen = false;
      for (const Candidate& other : candidates) {
        if (other.slot == c.slot && other.value_tokens == c.value_tokens) {
          seen = true;
          break;
        }
      }
      if (!seen) candidates.push_back(std::move(c));
    }
  }

  const std::vector<std::string> tokens = tokenize(utterance);
  AttenuationResult result;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const Candidate* best = nullptr;
    for (const Candidate& c : candidates) {
      if (c.value_tokens.size() > tokens.size() - i) continue;
      if (!std::equal(c.value_tokens.begin(), c.value_tokens.end(), tokens.begin() + i)) continue;
      if (best == nullptr || c.value_tokens.size() > best->value_tokens.size() ||
          (c.value_tokens.size() == best->value_tokens.size() && c.slot < best->slot)) {
        best = &c;
      }
    }
    if (best != nullptr) {
      result.tokens.push_back(best->slot);
      result.alignment.value_to_slot.emplace_back(best->value, best->slot);
      i += best->value_tokens.size();
      continue;
    }
    auto kw = keywords.find(tokens[i]);
    if (kw != keywords.end()) {
      result.tokens.push_back(kw->second);
      result.alignment.value_to_slot.emplace_back(kw->first, kw->second);
      ++i;
      continue;
    }
    result.tokens.push_back(tokens[i]);
    ++i;
  }
  return result;
}

// ---- staging ----

namespace {

std::string turn_key(const DialogueTurn& t) {
  std::string key = t.input_text;
  key.push_back('\x1f');
  for (const std::string& m : t.memory_items) {
    key += m;
    key.push_back('\x1e');
  }
  key.push_back('\x1f');
  key += t.target_text;
  return key;
}

// memory for stage 2: the question's slot names in first-appearance order
std::vector<std::string> alignment_slots(const Alignment& alignment) {
  std::vector<std::string> slots;
  for (const auto& [value, slot] : alignment.value_to_slot) {
    if (std::find(slots.begin(), slots.end(), slot) == slots.end()) slots.push_back(slot);
  }
  return slots;
}

const KbEntry* resolve_entry_for_answer(const Alignment& alignment,
                                        const std::vector<KbEntry>& entries) {
  const KbEntry* best = nullptr;
  int best_hits = 0;
  for (const KbEntry& entry : entries) {
    int hits = 0;
    for (const auto& [value, slot] : alignment.value_to_slot) {
      auto it = entry.find(slot);
      if (it != entry.end() && it->second == value) ++hits;
    }
    if (hits > best_hits) {
      best_hits = hits;
      best = &entry;
    }
  }
  return best;
}

std::vector<std::string> entry_memory_items(const KbEntry& entry) {
  std::vector<std::string> items;
  for (const auto& [slot, value] : entry) items.push_back(slot + ":" + value);
  return items;
}

}  // namespace

StageDatasets build_stage_datasets(const std::vector<RawDialogue>& dialogues,
                                   const KnowledgeBase& kb) {
  StageDatasets out;
  std::map<std::string, DialogueTurn> stage1, stage2, stage3;
  int inserted = 0;
  auto put = [&inserted](std::map<std::string, DialogueTurn>& dst, DialogueTurn turn) {
    ++inserted;
    dst.emplace(turn_key(turn), std::move(turn));
  };

  for (std::size_t idx = 0; idx < dialogues.size(); ++idx) {
    const RawDialogue& d = dialogues[idx];
    if (d.question.empty() || d.answer.empty() || d.scenario.empty()) {
      throw IngestionError("dialogue record " + std::to_string(idx) +
                           " is malformed (empty question, answer or scenario)");
    }
    ++out.report.dialogues;
    const std::vector<KbEntry>& entries = kb.entries(d.scenario);
    if (entries.empty()) ++out.report.missing_kb;

    // superlative keywords describe query constraints, so they attenuate
    // only on the question side; answers are tagged by value matches alone
    AttenuationResult q = attenuate(d.question, entries, superlative_keywords());
    AttenuationResult a = attenuate(d.answer, entries, {});

    put(stage1, {d.question, {}, join_tokens(q.tokens), "1", d.scenario});
    put(stage1, {d.answer, {}, join_tokens(a.tokens), "1", d.scenario});

    if (!entries.empty() && q.alignment.empty()) ++out.report.unmatched_questions;
    if (!entries.empty() && a.alignment.empty()) ++out.report.unmatched_answers;

    if (!q.alignment.empty()) {
      put(stage2,
          {join_tokens(q.tokens), alignment_slots(q.alignment), join_tokens(a.tokens), "2",
           d.scenario});
    }
    if (!a.alignment.empty()) {
      const KbEntry* entry = resolve_entry_for_answer(a.alignment, entries);
      if (entry != nullptr) {
        put(stage3, {join_tokens(a.tokens), entry_memory_items(*entry), d.answer, "3",
                     d.scenario});
      }
    }
  }

  for (auto& [key, turn] : stage1) out.stage1.push_back(std::move(turn));
  for (auto& [key, turn] : stage2) out.stage2.push_back(std::move(turn));
  for (auto& [key, turn] : stage3) out.stage3.push_back(std::move(turn));
  out.report.stage1_rows = static_cast<int>(out.stage1.size());
  out.report.stage2_rows = static_cast<int>(out.stage2.size());
  out.report.stage3_rows = static_cast<int>(out.stage3.size());
  out.report.duplicates_removed =
      inserted - out.report.stage1_rows - out.report.stage2_rows - out.report.stage3_rows;
  return out;
}

std::string DataQualityReport::to_json_string() const {
  nlohmann::json j{{"dialogues", dialogues},
                   {"missing_kb", missing_kb},
                   {"unmatched_questions", unmatched_questions},
                   {"unmatched_answers", unmatched_answers},
                   {"duplicates_removed", duplicates_removed},
                   {"stage1_rows", stage1_rows},
                   {"stage2_rows", stage2_rows},
                   {"stage3_rows", stage3_rows}};
  return j.dump();
}

// ---- corpus files ----

std::vector<DialogueTurn> load_turns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open corpus file: " + path);
  std::vector<DialogueTurn> turns;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      DialogueTurn t;
      t.input_text = j.at("input").get<std::string>();
      t.memory_items = j.at("memory").get<std::vector<std::string>>();
      t.target_text = j.at("target").get<std::string>();
      t.stage = j.at("stage").get<std::string>();
      t.scenario = j.value("scenario", std::string());
      turns.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError("corpus record " + std::to_string(line_no) + " in " + path +
                           " is malformed: " + e.what());
    }
  }
  return turns;
}

void save_turns(const std::string& path, const std::vector<DialogueTurn>& turns) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot open corpus file for writing: " + path);
  for (const DialogueTurn& t : turns) {
    nlohmann::json j{{"input", t.input_text},
                     {"memory", t.memory_items},
                     {"target", t.target_text},
                     {"stage", t.stage},
                     {"scenario", t.scenario}};
    out << j.dump() << "\n";
  }
}

KnowledgeBase load_kb(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open KB file: " + path);
  KnowledgeBase kb;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      const std::string scenario = j.at("scenario").get<std::string>();
      for (const nlohmann::json& entry : j.at("entries")) {
        KbEntry e;
        for (auto it = entry.begin(); it != entry.end(); ++it) {
          e[it.key()] = it.value().get<std::string>();
        }
        if (e.empty()) throw IngestionError("empty KB entry");
        kb.scenarios[scenario].push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError("KB record " + std::to_string(line_no) + " in " + path +
                           " is malformed: " + e.what());
    }
  }
  return kb;
}

void save_kb(const std::string& path, const KnowledgeBase& kb) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot open KB file for writing: " + path);
  for (const auto& [scenario, entries] : kb.scenarios) {
    nlohmann::json arr = nlohmann::json::array();
    for (const KbEntry& e : entries) {
      nlohmann::json obj;
      for (const auto& [slot, value] : e) obj[slot] = value;
      arr.push_back(obj);
    }
    out << nlohmann::json{{"scenario", scenario}, {"entries", arr}}.dump() << "\n";
  }
}

std::vector<DialogueTurn> load_style_corpus(const std::string& path) {
  static const std::set<std::string> genders{"female", "male"};
  static const std::set<std::string> ages{"young", "middle-aged", "elderly"};
  std::vector<DialogueTurn> turns = load_turns(path);
  for (std::size_t i = 0; i < turns.size(); ++i) {
    DialogueTurn& t = turns[i];
    if (t.stage != "style") {
      throw IngestionError("style corpus row " + std::to_string(i + 1) + " has stage '" +
                           t.stage + "'");
    }
    if (t.memory_items.size() != 2 || !genders.count(t.memory_items[0]) ||
        !ages.count(t.memory_items[1])) {
      throw IngestionError("style corpus row " + std::to_string(i + 1) +
                           " is missing a [gender, age] profile");
    }
  }
  return turns;
}

// ---- encoding ----

std::vector<int> encode_memory_items(const std::vector<std::string>& items,
                                     const Vocabulary& vocab, int* unk_counter) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) ids.push_back(vocab.id_or_unk("|"));
    const std::vector<int> item_ids = vocab.encode(tokenize(items[i]), unk_counter);
    ids.insert(ids.end(), item_ids.begin(), item_ids.end());
  }
  return ids;
}

EncodedTurn encode_turn(const DialogueTurn& turn, const Vocabulary& vocab,
                        const ModelConfig& config, EncodeStats* stats) {
  int unk = 0;
  int truncated = 0;
  auto truncate = [&truncated](std::vector<int>& ids, int cap) {
    if (static_cast<int>(ids.size()) > cap) {
      ids.resize(static_cast<std::size_t>(cap));
      ++truncated;
    }
  };

  EncodedTurn enc;
  enc.input_ids = vocab.encode(tokenize(turn.input_text), &unk);
  truncate(enc.input_ids, config.max_seq_len);
  enc.memory_ids = encode_memory_items(turn.memory_items, vocab, &unk);
  truncate(enc.memory_ids, config.max_memory_len);
  std::vector<int> target = vocab.encode(tokenize(turn.target_text), &unk);
  truncate(target, config.max_seq_len - 2);
  enc.target_ids.push_back(config.bos_id);
  enc.target_ids.insert(enc.target_ids.end(), target.begin(), target.end());
  enc.target_ids.push_back(config.eos_id);
  if (stats != nullptr) {
    stats->unknown_tokens += unk;
    stats->truncated_sequences += truncated;
  }
  return enc;
}

// ---- synthetic CAR corpus ----

namespace {

struct TypePois {
  const char* type;
  const char* poi_a;
  const char* poi_b;
};

constexpr std::array<TypePois, 6> kPoiTypes{{
    {"parking garage", "webster garage", "dish parking"},
    {"gas station", "valero", "chevron"},
    {"coffee shop", "peets coffee", "philz coffee"},
    {"chinese restaurant", "pf changs", "panda express"},
    {"grocery store", "safeway", "whole foods"},
    {"hospital", "stanford hospital", "el camino hospital"},
}};

constexpr std::array<const char*, 12> kAddresses{
    "550 alester ave",     "269 alger dr",      "5671 barringer street", "783 arcadia pl",
    "145 amherst st",      "409 bollard st",    "899 ames ct",           "113 anton ct",
    "270 altaire walk",    "481 amaranta ave",  "516 elm street",        "638 webster port",
};

constexpr std::array<const char*, 6> kEvents{"dentist appointment", "doctor appointment",
                                             "yoga session",        "swimming activity",
                                             "football activity",   "lab appointment"};
constexpr std::array<const char*, 6> kDates{"monday", "tuesday", "wednesday",
                                            "thursday", "friday", "the 5th"};
constexpr std::array<const char*, 6> kTimes{"1 pm", "11 am", "7 pm", "2 pm", "5 pm", "9 am"};
constexpr std::array<const char*, 6> kParties{"alex", "marie", "jon",
                                              "ana",  "your sister", "your boss"};

std::string miles(int n) { return std::to_string(n) + " miles"; }

// Question prefixes vary the surface form; the answer paraphrase is keyed
// off the prefix index so the attenuated-question -> attenuated-answer
// mapping stays a function the stage-2 model can learn.
constexpr std::array<const char*, 10> kPrefixes{"",      "please", "hey",   "okay",  "now",
                                                "also",  "next",   "listen", "sorry", "again"};

struct NavTemplate {
  const char* question;          // {t} = poitype
  std::array<const char*, 3> answers;  // paraphrases, slots from the entry
};

constexpr std::array<NavTemplate, 6> kNavTemplates{{
    {"where is the nearest {t}",
     {"the nearest {t} is {poi} at {addr}", "the nearest {t} is {poi} over at {addr}",
      "{poi} at {addr} is the nearest {t}"}},
    {"can you find me the fastest route to a {t}",
     {"{poi} is {dist} away", "{poi} is about {dist} away",
      "the route to {poi} covers {dist}"}},
    {"give me directions to the closest {t}",
     {"{poi} is located at {addr}", "you can find {poi} at {addr}",
      "head over to {poi} at {addr}"}},
    {"what is the address of the nearest {t}",
     {"the nearest {t} is at {addr}", "the address is {addr}", "{poi} sits at {addr}"}},
    {"how far is the closest {t}",
     {"{poi} is {dist} away from you", "{poi} lies {dist} from here",
      "just {dist} to reach {poi}"}},
    {"is there a {t} nearby",
     {"there is {poi} at {addr} {dist} away", "yes {poi} at {addr} is {dist} away",
      "{poi} is nearby at {addr} just {dist} away"}},
}};

struct CalTemplate {
  const char* question;  // {e} = event
  std::array<const char*, 3> answers;
};

constexpr std::array<CalTemplate, 4> kCalTemplates{{
    {"when is my {e}",
     {"your {e} is on {date} at {time}", "the {e} is set for {date} at {time}",
      "it is on {date} at {time}"}},
    {"who is going to the {e}",
     {"{party} will attend the {e} on {date}", "{party} is going to the {e} on {date}",
      "{party} plans to join the {e}"}},
    {"what time is the {e}",
     {"the {e} starts at {time}", "it starts at {time}", "{time} is when the {e} begins"}},
    {"on which day is my {e}",
     {"your {e} takes place on {date}", "the {e} is scheduled for {date}",
      "{date} is the day of the {e}"}},
}};

std::string with_prefix(std::size_t prefix_idx, const std::string& question) {
  const std::string prefix = kPrefixes[prefix_idx];
  return prefix.empty() ? question : prefix + " " + question;
}

std::string fill_template(std::string text,
                          const std::vector<std::pair<std::string, std::string>>& subs) {
  for (const auto& [key, value] : subs) {
    std::string placeholder = "{" + key + "}";
    std::size_t pos;
    while ((pos = text.find(placeholder)) != std::string::npos) {
      text.replace(pos, placeholder.size(), value);
    }
  }
  return text;
}

}  // namespace

SyntheticCarCorpus make_synthetic_car_corpus(int scenario_count, std::uint64_t seed) {
  if (scenario_count <= 0) throw ConfigurationError("scenario_count must be positive");
  SyntheticCarCorpus corpus;
  Rng rng(seed);

  for (int s = 0; s < scenario_count; ++s) {
    const std::string scenario = "s" + std::to_string(s);
    std::vector<KbEntry>& entries = corpus.kb.scenarios[scenario];

    if (s % 2 == 0) {
      // navigation scenario: three poi types, two entries each; the
      // nearest entry comes first so equals-only resolution and
      // superlative resolution agree on the ground truth
      std::array<int, 8> distance_pool{2, 3, 4, 5, 6, 7, 8, 9};
      for (std::size_t i = distance_pool.size() - 1; i > 0; --i) {
        std::swap(distance_pool[i], distance_pool[rng.next_index(i + 1)]);
      }
      int next_distance = 0;
      for (int k = 0; k < 3; ++k) {
        const TypePois& tp = kPoiTypes[static_cast<std::size_t>((s / 2 + k) % 6)];
        int da = distance_pool[static_cast<std::size_t>(next_distance++)];
        int db = distance_pool[static_cast<std::size_t>(next_distance++)];
        if (s == 0 && std::string(tp.type) == "parking garage") {
          da = 4;  // the canonical webster garage example
          db = 7;
        }
        if (da > db) std::swap(da, db);
        const char* addr_a = kAddresses[rng.next_index(kAddresses.size())];
        const char* addr_b = kAddresses[rng.next_index(kAddresses.size())];
        entries.push_back({{"poi", tp.poi_a},
                           {"poitype", tp.type},
                           {"poidistance", miles(da)},
                           {"poiaddress", addr_a}});
        entries.push_back({{"poi", tp.poi_b},
                           {"poitype", tp.type},
                           {"poidistance", miles(db)},
                           {"poiaddress", addr_b}});

        for (std::size_t t = 0; t < kNavTemplates.size(); ++t) {
          const NavTemplate& tmpl = kNavTemplates[t];
          // scenario 0 keeps the canonical unprefixed forms
          const std::size_t prefix_idx =
              s == 0 ? 0 : (static_cast<std::size_t>(s / 2 + k) + t) % kPrefixes.size();
          const std::size_t answer_idx = s == 0 ? 0 : prefix_idx % tmpl.answers.size();
          const KbEntry& truth = entries[entries.size() - 2];
          RawDialogue d;
          d.scenario = scenario;
          d.question = with_prefix(prefix_idx, fill_template(tmpl.question, {{"t", tp.type}}));
          d.answer = fill_template(tmpl.answers[answer_idx],
                                   {{"t", tp.type},
                                    {"poi", truth.at("poi")},
                                    {"dist", truth.at("poidistance")},
                                    {"addr", truth.at("poiaddress")}});
          corpus.dialogues.push_back(std::move(d));
        }
      }
    } else {
      // calendar scenario: three events, one entry each
      for (int k = 0; k < 3; ++k) {
        const char* event = kEvents[static_cast<std::size_t>((s / 2 + k) % 6)];
        KbEntry entry{{"poievent", event},
                      {"poidate", kDates[rng.next_index(kDates.size())]},
                      {"poitime", kTimes[rng.next_index(kTimes.size())]},
                      {"poiparty", kParties[rng.next_index(kParties.size())]}};
        for (std::size_t t = 0; t < kCalTemplates.size(); ++t) {
          const CalTemplate& tmpl = kCalTemplates[t];
          const std::size_t prefix_idx =
              (static_cast<std::size_t>(s / 2 + k) + t) % kPrefixes.size();
          const std::size_t answer_idx = prefix_idx % tmpl.answers.size();
          RawDialogue d;
          d.scenario = scenario;
          d.question = with_prefix(prefix_idx, fill_template(tmpl.question, {{"e", event}}));
          d.answer = fill_template(tmpl.answers[answer_idx],
                                   {{"e", event},
                                    {"date", entry.at("poidate")},
                                    {"time", entry.at("poitime")},
                                    {"party", entry.at("poiparty")}});
          corpus.dialogues.push_back(std::move(d));
        }
        entries.push_back(std::move(entry));
      }
    }
  }
  return corpus;
}

// ---- synthetic style corpus ----

namespace {

struct StyleFamily {
  const char* question;  // may contain {city}
  const char* elderly;
  const char* young;
  const char* middle;
};

// Row one of each profile mirrors the published personalized-dialogue
// examples so fidelity tests can assert them verbatim.
constexpr std::array<StyleFamily, 12> kStyleFamilies{{
    {"{city} please", "would you mind telling me how many guests shall be at your table",
     "how many are you", "ok sir i'm looking for options for you"},
    {"can you book a table in {city}", "certainly madam i shall arrange a table there shortly",
     "sure thing", "ok sir booking a table there now"},
    {"i would like to eat in {city}", "very well madam i shall look for a dining room there",
     "cool let me check", "alright sir i am checking restaurants there"},
    {"find me a restaurant in {city}",
     "of course madam allow me to search for a suitable restaurant", "searching now",
     "ok sir i will find you a restaurant"},
    {"we will be in {city} tonight", "wonderful madam i shall prepare a reservation for tonight",
     "got it tonight it is", "understood sir i will set it up for tonight"},
    {"is there a table in {city}", "let me verify madam whether a table is available",
     "checking for free tables", "one moment sir i will confirm availability"},
    {"my friends want dinner in {city}", "splendid madam i shall find a table for your party",
     "nice group dinner coming up", "very well sir i will arrange dinner for your friends"},
    {"please look for a place in {city}", "certainly madam i shall begin looking for a venue",
     "on the hunt", "right away sir i am on it"},
    {"can you book a table", "thank you madam i shall start the reservation now", "on it",
     "sure sir i will book it for you"},
    {"what is the phone number", "one moment madam i shall fetch the telephone number for you",
     "grabbing the number", "ok sir getting the phone number now"},
    {"do you have something cheaper", "my apologies madam i shall seek a more affordable option",
     "sure cheaper coming up", "alright sir i will look for a cheaper place"},
    {"thank you", "you are most welcome it was my pleasure to assist", "no problem",
     "you are welcome sir glad to help"},
}};

constexpr std::array<const char*, 24> kCities{
    "bombay", "madrid", "paris",  "rome",   "london", "seoul",  "tokyo",  "bangkok",
    "berlin", "lisbon", "oslo",   "dublin", "athens", "cairo",  "hanoi",  "quito",
    "lima",   "delhi",  "miami",  "denver", "austin", "boston", "dallas", "phoenix",
};

}  // namespace

std::vector<DialogueTurn> make_synthetic_style_corpus(int turns, std::uint64_t seed) {
  if (turns <= 0) throw ConfigurationError("style corpus size must be positive");
  const std::array<std::pair<const char*, const char*>, 3> profiles{
      {{"female", "elderly"}, {"female", "young"}, {"male", "middle-aged"}}};

  std::vector<DialogueTurn> all;
  for (const StyleFamily& family : kStyleFamilies) {
    const bool has_city = std::string(family.question).find("{city}") != std::string::npos;
    const std::size_t city_count = has_city ? kCities.size() : 1;
    for (std::size_t c = 0; c < city_count; ++c) {
      const std::string question =
          fill_template(family.question, {{"city", kCities[c]}});
      const std::array<const char*, 3> answers{family.elderly, family.young, family.middle};
      for (std::size_t p = 0; p < profiles.size(); ++p) {
        DialogueTurn t;
        t.input_text = question;
        t.memory_items = {profiles[p].first, profiles[p].second};
        t.target_text = answers[p];
        t.stage = "style";
        t.scenario = "style";
        all.push_back(std::move(t));
      }
    }
  }

  Rng rng(seed);
  for (std::size_t i = all.size() - 1; i > 0; --i) {
    std::swap(all[i], all[rng.next_index(i + 1)]);
  }
  if (static_cast<std::size_t>(turns) < all.size()) {
    all.resize(static_cast<std::size_t>(turns));
  }
  return all;
}

}  // namespace gat
