#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gat/data.hpp"
#include "gat/metrics.hpp"

using namespace gat;

namespace {

std::vector<TokenSeq> toks(std::initializer_list<const char*> sentences) {
  std::vector<TokenSeq> out;
  for (const char* s : sentences) out.push_back(tokenize(s));
  return out;
}

}  // namespace

TEST_CASE("bleu matches hand-computed oracles") {
  CHECK(bleu(toks({"the cat sat on the mat"}), toks({"the cat sat on the mat"})) ==
        doctest::Approx(100.0).epsilon(1e-9));

  // unigram precision 2/2 with brevity penalty exp(1 - 3/2)
  BleuOptions b1;
  b1.max_n = 1;
  CHECK(bleu(toks({"the cat"}), toks({"the cat sat"}), b1) ==
        doctest::Approx(100.0 * std::exp(-0.5)).epsilon(1e-6));

  const double disjoint = bleu(toks({"aa bb cc dd"}), toks({"xx yy zz ww"}));
  CHECK(disjoint >= 0.0);
  CHECK(disjoint < 1.0);

  CHECK_THROWS_AS(static_cast<void>(bleu({}, {})), DegenerateBatchError);
  CHECK_THROWS_AS(static_cast<void>(bleu(toks({"a"}), toks({"a", "b"}))), AlignmentError);
}

TEST_CASE("bleu aggregates corpus counts and is monotone under exact-match injection") {
  auto cands = toks({"the black cat sat down here", "a dog ran far away today"});
  auto refs = toks({"the black cat sat down there", "a dog ran very far away"});
  const double base = bleu(cands, refs);
  CHECK(base > 0.0);
  CHECK(base < 100.0);

  auto cands2 = cands;
  auto refs2 = refs;
  cands2.push_back(tokenize("exactly matching sentence pair here"));
  refs2.push_back(tokenize("exactly matching sentence pair here"));
  CHECK(bleu(cands2, refs2) >= base);

  // jointly permuting pairs leaves the corpus score unchanged
  std::vector<TokenSeq> pc{cands2[2], cands2[0], cands2[1]};
  std::vector<TokenSeq> pr{refs2[2], refs2[0], refs2[1]};
  CHECK(bleu(pc, pr) == bleu(cands2, refs2));
}

TEST_CASE("rouge_l matches the hand-computed LCS oracle") {
  CHECK(rouge_l(tokenize("same words here"), tokenize("same words here")) == 1.0);
  // LCS("a b c", "a c") = 2, P = 2/3, R = 1, F1 = 0.8
  CHECK(rouge_l(tokenize("a b c"), tokenize("a c")) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(rouge_l(tokenize("x y"), tokenize("p q")) == 0.0);
  CHECK_THROWS_AS(static_cast<void>(rouge_l({}, tokenize("a"))), DegenerateBatchError);

  // symmetric at beta = 1 when lengths match
  const TokenSeq a = tokenize("one two three four");
  const TokenSeq b = tokenize("one three two four");
  CHECK(rouge_l(a, b) == rouge_l(b, a));
}

TEST_CASE("ter counts edits against the reference length") {
  CHECK(ter(tokenize("same old words"), tokenize("same old words")) == 0.0);
  // one substitution in a 4-word reference
  CHECK(ter(tokenize("the cat sat down"), tokenize("the dog sat down")) ==
        doctest::Approx(25.0).epsilon(1e-12));
  // empty candidate: every reference word must be inserted
  CHECK(ter({}, tokenize("three word reference")) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK_THROWS_AS(static_cast<void>(ter(tokenize("a"), {})), DegenerateBatchError);

  // a block shift is one edit, cheaper than re-editing the words
  CHECK(ter(tokenize("c a b"), tokenize("a b c")) == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ter is nonnegative and zero only on identity") {
  Rng rng(3);
  const std::vector<std::string> pool{"a", "b", "c", "d", "e"};
  for (int t = 0; t < 50; ++t) {
    TokenSeq x;
    const int len = 1 + static_cast<int>(rng.next_index(8));
    for (int i = 0; i < len; ++i) x.push_back(pool[rng.next_index(pool.size())]);
    CHECK(ter(x, x) == 0.0);
    TokenSeq y = x;
    y.push_back("zz");
    CHECK(ter(y, x) > 0.0);
  }
}

TEST_CASE("greedy ter equals the exact shift search on short references") {
  // candidates diverge from their references the way MT output does: at
  // most one displaced phrase plus a couple of local token edits
  Rng rng(511);
  const std::vector<std::string> pool{"alpha", "bravo", "charlie", "delta", "echo",
                                      "fox",   "golf",  "hotel",   "india", "juliet"};
  for (int t = 0; t < 500; ++t) {
    const int ref_len = 2 + static_cast<int>(rng.next_index(9));
    TokenSeq ref;
    for (int i = 0; i < ref_len; ++i) ref.push_back(pool[rng.next_index(pool.size())]);
    TokenSeq cand = ref;
    if (rng.next_index(2) == 0 && cand.size() >= 2) {
      const std::size_t i = rng.next_index(cand.size());
      const std::size_t j = i + rng.next_index(cand.size() - i);
      TokenSeq span(cand.begin() + static_cast<std::ptrdiff_t>(i),
                    cand.begin() + static_cast<std::ptrdiff_t>(j) + 1);
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(i),
                 cand.begin() + static_cast<std::ptrdiff_t>(j) + 1);
      const std::size_t k = rng.next_index(cand.size() + 1);
      cand.insert(cand.begin() + static_cast<std::ptrdiff_t>(k), span.begin(), span.end());
    }
    const int edits = static_cast<int>(rng.next_index(3));
    for (int m = 0; m < edits && !cand.empty(); ++m) {
      switch (rng.next_index(3)) {
        case 0:
          cand[rng.next_index(cand.size())] = pool[rng.next_index(pool.size())];
          break;
        case 1:
          cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(rng.next_index(cand.size())));
          break;
        default:
          cand.insert(cand.begin() + static_cast<std::ptrdiff_t>(rng.next_index(cand.size() + 1)),
                      pool[rng.next_index(pool.size())]);
          break;
      }
    }
    if (cand.empty()) cand.push_back(pool[0]);
    CHECK(ter(cand, ref) == ter_exact(cand, ref));
  }
}

TEST_CASE("chrf matches the hand-computed character oracle") {
  CHECK(chrf("identical text", "identical text") == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(chrf("aaa", "zzz") == 0.0);

  // char unigrams of abc vs abd: P = R = 2/3, F2 = 2/3
  ChrfOptions c1;
  c1.char_n = 1;
  CHECK(chrf("abc", "abd", c1) == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));

  CHECK_THROWS_AS(static_cast<void>(chrf("", "x")), DegenerateBatchError);

  // word-order mixing changes the score when word order differs
  ChrfOptions mixed;
  mixed.word_n = 2;
  CHECK(chrf("b a", "a b", mixed) < chrf("a b", "a b", mixed));
}

TEST_CASE("slot answer accuracy compares extracted slot sets") {
  const SlotLexicon lex = SlotLexicon::defaults();
  // the published worked pair: same slots, different formulation
  auto preds = toks({"your poievent activity is on poidate at poitime"});
  auto golds = toks({"you have a poievent activity on poidate at poitime"});
  CHECK(slot_answer_accuracy(preds, golds, lex) == 1.0);

  preds = toks({"your poievent is on poidate"});
  golds = toks({"you have a poievent activity on poidate at poitime"});
  CHECK(slot_answer_accuracy(preds, golds, lex) == 0.0);

  // slot-free on both sides counts as vacuously correct
  preds = toks({"completely different words"});
  golds = toks({"another formulation entirely"});
  CHECK(slot_answer_accuracy(preds, golds, lex) == 1.0);

  CHECK_THROWS_AS(static_cast<void>(slot_answer_accuracy({}, {}, lex)), DegenerateBatchError);
}

TEST_CASE("paired bootstrap obeys its degenerate contracts") {
  auto refs = toks({"the cat sat here", "a dog ran away", "birds fly south now",
                    "fish swim deep down", "the sun rose early"});
  auto good = refs;
  auto bad = toks({"wrong words entirely here", "nothing matches at all", "zz yy xx ww",
                   "qq pp oo nn", "mm ll kk jj"});
  MetricFn metric = [](const std::vector<TokenSeq>& c, const std::vector<TokenSeq>& r) {
    return bleu(c, r);
  };

  // identical systems never win against themselves
  BootstrapResult same = paired_bootstrap(good, good, refs, metric, 200, 9);
  CHECK(same.p_value > 0.9);

  // strict dominance on every sentence
  BootstrapResult dom = paired_bootstrap(good, bad, refs, metric, 200, 9);
  CHECK(dom.p_value < 0.01);

  BootstrapResult again = paired_bootstrap(good, bad, refs, metric, 200, 9);
  CHECK(dom.p_value == again.p_value);

  CHECK_THROWS_AS(
      static_cast<void>(paired_bootstrap(good, bad, refs, metric, 50, 9)), ParameterError);
  auto short_refs = toks({"one", "two"});
  CHECK_THROWS_AS(
      static_cast<void>(paired_bootstrap(good, bad, short_refs, metric, 200, 9)),
      AlignmentError);
}

TEST_CASE("metric permutation consistency") {
  auto cands = toks({"aa bb cc", "dd ee ff", "gg hh"});
  auto refs = toks({"aa bb xx", "dd yy ff", "gg hh"});
  std::vector<std::size_t> perm{2, 0, 1};
  std::vector<TokenSeq> pc, pr;
  for (std::size_t i : perm) {
    pc.push_back(cands[i]);
    pr.push_back(refs[i]);
  }
  CHECK(bleu(pc, pr) == bleu(cands, refs));
  CHECK(ter_corpus(pc, pr) == ter_corpus(cands, refs));
  CHECK(rouge_l_corpus(pc, pr) == rouge_l_corpus(cands, refs));
}

TEST_CASE("evaluation report carries scores and bootstrap comparisons") {
  auto refs = toks({"the poi is poidistance away", "your poievent is on poidate",
                    "the nearest poitype is poi", "there is a poitype at poiaddress",
                    "poiparty will attend the poievent"});
  auto system = refs;  // perfect system
  auto baseline = toks({"the poi is here", "your poievent is soon", "the nearest place is poi",
                        "there is a poitype somewhere", "someone will attend the poievent"});

  MetricsReport report = evaluate_outputs("system", system, refs, SlotLexicon::defaults(),
                                          &baseline, "baseline", 200, 11);
  CHECK(report.scores.at("bleu-4") == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(report.scores.at("ter") == 0.0);
  CHECK(report.scores.at("rouge-l") == 1.0);
  CHECK(report.scores.at("slot_accuracy") == 1.0);
  REQUIRE(report.comparison.has_value());
  CHECK(report.comparison->p_values.at("bleu-4") < 0.05);
  CHECK(report.comparison->deltas.at("bleu-4") > 0.0);

  // the fast stats path must agree with direct recomputation
  CHECK(report.scores.at("bleu-4") == doctest::Approx(bleu(system, refs)).epsilon(1e-12));
  CHECK(report.comparison->baseline_scores.at("bleu-4") ==
        doctest::Approx(bleu(baseline, refs)).epsilon(1e-12));
  CHECK(report.scores.at("chrf") ==
        doctest::Approx(chrf_corpus({"the poi is poidistance away",
                                     "your poievent is on poidate",
                                     "the nearest poitype is poi",
                                     "there is a poitype at poiaddress",
                                     "poiparty will attend the poievent"},
                                    {"the poi is poidistance away",
                                     "your poievent is on poidate",
                                     "the nearest poitype is poi",
                                     "there is a poitype at poiaddress",
                                     "poiparty will attend the poievent"}))
            .epsilon(1e-12));

  const std::string json = report.to_json_string();
  CHECK(json.find("\"system\"") != std::string::npos);
  CHECK(json.find("p_values") != std::string::npos);
}
