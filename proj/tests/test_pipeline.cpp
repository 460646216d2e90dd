#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "gat/pipeline.hpp"

using namespace gat;

namespace {

std::vector<KbEntry> worked_example_entries() {
  return {{{"poi", "webster garage"},
           {"poitype", "parking garage"},
           {"poidistance", "4 miles"}},
          {{"poi", "dish parking"},
           {"poitype", "parking garage"},
           {"poidistance", "7 miles"}},
          {{"poi", "valero"}, {"poitype", "gas station"}, {"poidistance", "2 miles"}}};
}

}  // namespace

TEST_CASE("kb query construction mirrors the worked example") {
  Alignment alignment;
  alignment.value_to_slot = {{"fastest", "poidistance"}, {"parking garage", "poitype"}};
  KbQuery query = construct_kb_query(alignment);
  REQUIRE(query.constraints.size() == 2);
  CHECK(query.constraints[0] ==
        KbConstraint{"poitype", Comparator::equals, "parking garage"});
  CHECK(query.constraints[1] ==
        KbConstraint{"poidistance", Comparator::superlative, "fastest"});

  Alignment single;
  single.value_to_slot = {{"dentist appointment", "poievent"}};
  KbQuery q2 = construct_kb_query(single);
  REQUIRE(q2.constraints.size() == 1);
  CHECK(q2.constraints[0].comparator == Comparator::equals);

  CHECK_THROWS_AS(static_cast<void>(construct_kb_query(Alignment{})), QueryError);
}

TEST_CASE("query resolution picks the extremal matching entry") {
  Alignment alignment;
  alignment.value_to_slot = {{"fastest", "poidistance"}, {"parking garage", "poitype"}};
  KbQuery query = construct_kb_query(alignment);

  auto items = resolve_query(query, worked_example_entries());
  CHECK(std::set<std::string>(items.begin(), items.end()) ==
        std::set<std::string>{"poitype:parking garage", "poi:webster garage",
                              "poidistance:4 miles"});

  // single-entry KB with a matching equals constraint
  std::vector<KbEntry> one{{{"poievent", "yoga session"}, {"poidate", "monday"}}};
  KbQuery q2;
  q2.constraints = {{"poievent", Comparator::equals, "yoga session"}};
  auto r2 = resolve_query(q2, one);
  CHECK(std::set<std::string>(r2.begin(), r2.end()) ==
        std::set<std::string>{"poievent:yoga session", "poidate:monday"});

  KbQuery unmatched;
  unmatched.constraints = {{"poitype", Comparator::equals, "airport"}};
  CHECK_THROWS_AS(static_cast<void>(resolve_query(unmatched, worked_example_entries())),
                  ResolutionError);
}

TEST_CASE("query resolution agrees with a brute-force scan on every synthetic scenario") {
  SyntheticCarCorpus corpus = make_synthetic_car_corpus(10, 77);
  int checked = 0;
  for (const RawDialogue& d : corpus.dialogues) {
    const auto& entries = corpus.kb.entries(d.scenario);
    AttenuationResult att = attenuate(d.question, entries);
    if (att.alignment.empty()) continue;
    KbQuery query = construct_kb_query(att.alignment);

    // independent exhaustive resolution
    std::vector<KbEntry> candidates;
    for (const KbEntry& e : entries) {
      bool ok = true;
      for (const KbConstraint& c : query.constraints) {
        if (c.comparator != Comparator::equals) continue;
        auto it = e.find(c.slot);
        if (it == e.end() || it->second != c.operand) ok = false;
      }
      if (ok) candidates.push_back(e);
    }
    for (const KbConstraint& c : query.constraints) {
      if (c.comparator != Comparator::superlative || candidates.empty()) continue;
      const KbEntry* best = nullptr;
      for (const KbEntry& e : candidates) {
        if (!e.count(c.slot)) continue;
        if (best == nullptr) {
          best = &e;
          continue;
        }
        const char* cur = e.at(c.slot).c_str();
        const char* ref = best->at(c.slot).c_str();
        char* end_cur = nullptr;
        char* end_ref = nullptr;
        const double nc = std::strtod(cur, &end_cur);
        const double nr = std::strtod(ref, &end_ref);
        const bool both_numeric = end_cur != cur && end_ref != ref;
        if (both_numeric ? nc < nr : e.at(c.slot) < best->at(c.slot)) best = &e;
      }
      candidates = best ? std::vector<KbEntry>{*best} : std::vector<KbEntry>{};
    }
    REQUIRE(!candidates.empty());
    std::set<std::string> expected;
    for (const auto& [slot, value] : candidates.front()) expected.insert(slot + ":" + value);

    auto items = resolve_query(query, entries);
    CHECK(std::set<std::string>(items.begin(), items.end()) == expected);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("deterministic slot filling restores the canonical answer") {
  FillResult filled = fill_slots_deterministic(
      tokenize("poi is poidistance away"),
      {"poitype:parking garage", "poi:webster garage", "poidistance:4 miles"});
  CHECK(join_tokens(filled.tokens) == "webster garage is 4 miles away");
  CHECK(filled.unmatched_slots == 0);

  FillResult untouched = fill_slots_deterministic(tokenize("hello out there"), {"poi:x"});
  CHECK(join_tokens(untouched.tokens) == "hello out there");
  CHECK(untouched.unmatched_slots == 0);

  FillResult missing = fill_slots_deterministic(tokenize("poi is poidistance away"),
                                                {"poi:webster garage"});
  CHECK(join_tokens(missing.tokens) == "webster garage is poidistance away");
  CHECK(missing.unmatched_slots == 1);
}

TEST_CASE("fill composed with resolve reproduces every synthetic answer") {
  SyntheticCarCorpus corpus = make_synthetic_car_corpus(8, 13);
  for (const RawDialogue& d : corpus.dialogues) {
    const auto& entries = corpus.kb.entries(d.scenario);
    AttenuationResult q = attenuate(d.question, entries);
    REQUIRE(!q.alignment.empty());
    auto resolved = resolve_query(construct_kb_query(q.alignment), entries);
    AttenuationResult a = attenuate(d.answer, entries, {});
    FillResult filled = fill_slots_deterministic(a.tokens, resolved);
    CHECK(join_tokens(filled.tokens) == join_tokens(tokenize(d.answer)));
  }
}

TEST_CASE("alignment recovery inverts attenuation via anchor tokens") {
  const SlotLexicon lexicon = SlotLexicon::defaults();
  Alignment alignment = recover_alignment(
      tokenize("can you find me the fastest route to a parking garage"),
      tokenize("can you find me the poidistance route to a poitype"), lexicon);
  REQUIRE(alignment.value_to_slot.size() == 2);
  CHECK(alignment.value_to_slot[0] ==
        std::pair<std::string, std::string>{"fastest", "poidistance"});
  CHECK(alignment.value_to_slot[1] ==
        std::pair<std::string, std::string>{"parking garage", "poitype"});

  CHECK(recover_alignment(tokenize("hello there"), tokenize("hello there"), lexicon).empty());

  // trailing replacement with no right anchor
  Alignment tail = recover_alignment(tokenize("when is my dentist appointment"),
                                     tokenize("when is my poievent"), lexicon);
  REQUIRE(tail.value_to_slot.size() == 1);
  CHECK(tail.value_to_slot[0] ==
        std::pair<std::string, std::string>{"dentist appointment", "poievent"});
}

TEST_CASE("pipeline degrades to a structured fallback and stays deterministic") {
  ModelConfig cfg;
  cfg.vocab_size = 64;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  cfg.max_seq_len = 24;
  cfg.max_memory_len = 24;
  cfg.feedforward_dim = 16;

  SyntheticCarCorpus corpus = make_synthetic_car_corpus(2, 3);
  std::vector<std::vector<std::string>> streams;
  for (const RawDialogue& d : corpus.dialogues) {
    streams.push_back(tokenize(d.question));
    streams.push_back(tokenize(d.answer));
  }
  Vocabulary vocab = Vocabulary::build(streams);
  cfg.vocab_size = vocab.size();

  // untrained models produce junk without slots; the pipeline must fall
  // back rather than throw
  MemoryAugmentedTransformer s1(cfg, 1), s2(cfg, 2), s3(cfg, 3);
  StageModels models{&s1, &s2, &s3, &vocab};
  PipelineTrace trace = run_three_stage("can you find me the fastest route to a parking garage",
                                        corpus.kb.entries("s0"), models,
                                        SlotLexicon::defaults());
  if (!trace.ok) {
    CHECK(trace.answer == "i could not find that information");
    CHECK(!trace.error.empty());
  }

  PipelineTrace again = run_three_stage("can you find me the fastest route to a parking garage",
                                        corpus.kb.entries("s0"), models,
                                        SlotLexicon::defaults());
  CHECK(trace.answer == again.answer);
  CHECK(trace.stage1_output == again.stage1_output);
  CHECK(trace.to_json_string() == again.to_json_string());
  Tape::active().clear();
}
