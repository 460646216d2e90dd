#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gat/conditions.hpp"

namespace gat {

using TokenSeq = std::vector<std::string>;

struct BleuOptions {
  int max_n = 4;
  double smoothing_epsilon = 1e-9;  // substituted for zero clipped counts
};

// Corpus BLEU in [0, 100]: geometric mean of clipped n-gram precisions from
// corpus-aggregated counts (never averaged sentence scores) times the
// brevity penalty. Orders with no candidate n-grams are dropped from the
// mean.
double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
            BleuOptions options = {});

// LCS-based F-score in [0, 1]. The beta convention is an argument so the
// report can disclose it; beta = 1 is the symmetric default.
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta = 1.0);
double rouge_l_corpus(const std::vector<TokenSeq>& candidates,
                      const std::vector<TokenSeq>& references, double beta = 1.0);

// Translation edit rate as a percentage of the reference length:
// insert/delete/substitute plus block shifts found greedily (each shift
// costs one edit).
double ter(const TokenSeq& candidate, const TokenSeq& reference);
// Exhaustive minimum over shift sequences, feasible for references up to 10
// tokens; the oracle for the greedy heuristic.
double ter_exact(const TokenSeq& candidate, const TokenSeq& reference);
double ter_corpus(const std::vector<TokenSeq>& candidates,
                  const std::vector<TokenSeq>& references);

struct ChrfOptions {
  int char_n = 6;
  int word_n = 0;  // extra word n-gram orders mixed in (chrF++ style)
  double beta = 2.0;
};

// Character n-gram F-beta in [0, 100] over whitespace-stripped text,
// optionally mixed with word n-gram orders.
double chrf(const std::string& candidate, const std::string& reference, ChrfOptions options = {});
double chrf_corpus(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references, ChrfOptions options = {});

// Fraction of pairs whose extracted slot-name sets match exactly.
double slot_answer_accuracy(const std::vector<TokenSeq>& predictions,
                            const std::vector<TokenSeq>& golds, const SlotLexicon& lexicon);

using MetricFn = std::function<double(const std::vector<TokenSeq>& candidates,
                                      const std::vector<TokenSeq>& references)>;

struct BootstrapResult {
  double score_a = 0.0;
  double score_b = 0.0;
  double delta = 0.0;
  double p_value = 1.0;
};

// Paired bootstrap resampling: p is the fraction of resampled corpora whose
// score delta flips sign against the full-corpus delta (a zero full-corpus
// delta counts every resample). Deterministic under the seed.
BootstrapResult paired_bootstrap(const std::vector<TokenSeq>& system_a,
                                 const std::vector<TokenSeq>& system_b,
                                 const std::vector<TokenSeq>& references, const MetricFn& metric,
                                 int resamples = 1000, std::uint64_t seed = 42);

struct MetricsReport {
  std::string system;
  int sentence_count = 0;
  std::map<std::string, double> scores;
  std::map<std::string, std::vector<double>> sentence_scores;
  struct Comparison {
    std::string baseline;
    std::map<std::string, double> baseline_scores;
    std::map<std::string, double> deltas;
    std::map<std::string, double> p_values;
  };
  std::optional<Comparison> comparison;
  std::string to_json_string() const;
};

// Scores a system (BLEU-1..4, chrF, TER, ROUGE-L, slot accuracy) and, when
// baseline outputs are given, attaches paired-bootstrap p-values per
// metric. Bootstraps run on precomputed per-sentence statistics, which is
// equivalent to rescoring each resample.
MetricsReport evaluate_outputs(const std::string& system_name,
                               const std::vector<TokenSeq>& candidates,
                               const std::vector<TokenSeq>& references,
                               const SlotLexicon& lexicon,
                               const std::vector<TokenSeq>* baseline = nullptr,
                               const std::string& baseline_name = "baseline",
                               int resamples = 1000, std::uint64_t seed = 42);

}  // namespace gat
