#include "gat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "gat/data.hpp"

namespace gat {

namespace {

void check_parallel(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw AlignmentError(std::string(what) + ": " + std::to_string(a) + " vs " +
                         std::to_string(b) + " rows");
  }
}

void check_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw DegenerateBatchError(std::string(what) + " on an empty corpus");
}

// n-grams keyed by joined tokens; '\x1f' cannot occur inside a token
std::unordered_map<std::string, int> ngram_counts(const TokenSeq& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

// ---- BLEU ----

namespace {

// [m_1..m_maxn, t_1..t_maxn, cand_len, ref_len]
std::vector<double> bleu_sentence_stats(const TokenSeq& cand, const TokenSeq& ref, int max_n) {
  std::vector<double> stats(static_cast<std::size_t>(2 * max_n + 2), 0.0);
  for (int n = 1; n <= max_n; ++n) {
    const auto cand_counts = ngram_counts(cand, n);
    const auto ref_counts = ngram_counts(ref, n);
    double matches = 0.0, total = 0.0;
    for (const auto& [gram, count] : cand_counts) {
      total += count;
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    stats[static_cast<std::size_t>(n - 1)] = matches;
    stats[static_cast<std::size_t>(max_n + n - 1)] = total;
  }
  stats[static_cast<std::size_t>(2 * max_n)] = static_cast<double>(cand.size());
  stats[static_cast<std::size_t>(2 * max_n + 1)] = static_cast<double>(ref.size());
  return stats;
}

double bleu_from_stats(const std::vector<double>& stats, int max_n, double epsilon) {
  const double cand_len = stats[static_cast<std::size_t>(2 * max_n)];
  const double ref_len = stats[static_cast<std::size_t>(2 * max_n + 1)];
  if (cand_len <= 0.0) return 0.0;
  double log_sum = 0.0;
  int effective = 0;
  for (int n = 1; n <= max_n; ++n) {
    const double total = stats[static_cast<std::size_t>(max_n + n - 1)];
    if (total <= 0.0) continue;
    const double matches = stats[static_cast<std::size_t>(n - 1)];
    log_sum += std::log((matches > 0.0 ? matches : epsilon) / total);
    ++effective;
  }
  if (effective == 0) return 0.0;
  const double brevity = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * brevity * std::exp(log_sum / effective);
}

}  // namespace

double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
            BleuOptions options) {
  check_parallel(candidates.size(), references.size(), "bleu corpora");
  check_nonempty(candidates.size(), "bleu");
  std::vector<double> total(static_cast<std::size_t>(2 * options.max_n + 2), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto stats = bleu_sentence_stats(candidates[i], references[i], options.max_n);
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += stats[j];
  }
  return bleu_from_stats(total, options.max_n, options.smoothing_epsilon);
}

// ---- ROUGE-L ----

namespace {

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

}  // namespace

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta) {
  if (candidate.empty() || reference.empty()) {
    throw DegenerateBatchError("rouge_l requires non-empty candidate and reference");
  }
  const double lcs = lcs_length(candidate, reference);
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double denom = r + beta * beta * p;
  return denom > 0.0 ? (1.0 + beta * beta) * p * r / denom : 0.0;
}

double rouge_l_corpus(const std::vector<TokenSeq>& candidates,
                      const std::vector<TokenSeq>& references, double beta) {
  check_parallel(candidates.size(), references.size(), "rouge corpora");
  check_nonempty(candidates.size(), "rouge_l");
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    sum += rouge_l(candidates[i], references[i], beta);
  }
  return sum / static_cast<double>(candidates.size());
}

// ---- TER ----

namespace {

int levenshtein(const TokenSeq& a, const TokenSeq& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<int> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

TokenSeq apply_shift(const TokenSeq& seq, std::size_t i, std::size_t j, std::size_t k) {
  // move span [i, j] (inclusive) so it starts at position k of the reduced
  // sequence
  TokenSeq rest;
  rest.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (t < i || t > j) rest.push_back(seq[t]);
  }
  TokenSeq out;
  out.reserve(seq.size());
  out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k));
  out.insert(out.end(), seq.begin() + static_cast<std::ptrdiff_t>(i),
             seq.begin() + static_cast<std::ptrdiff_t>(j) + 1);
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(k), rest.end());
  return out;
}

template <typename Fn>
void for_each_shift(const TokenSeq& seq, Fn fn) {
  const std::size_t len = seq.size();
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = i; j < len; ++j) {
      for (std::size_t k = 0; k + (j - i + 1) <= len; ++k) {
        if (k == i) continue;  // no-op
        fn(apply_shift(seq, i, j, k));
      }
    }
  }
}

int best_single_shift_improvement(const TokenSeq& seq, const TokenSeq& reference, int base) {
  int best = 0;
  for_each_shift(seq, [&](TokenSeq arr) {
    best = std::max(best, base - levenshtein(arr, reference));
  });
  return best;
}

// Greedy with a two-shift horizon: each round scores every improving shift
// by its own gain plus the best follow-up gain, then commits the winner.
// Improving shifts are sparse on natural text, so the second level stays
// cheap.
int ter_edits_greedy(const TokenSeq& candidate, const TokenSeq& reference) {
  TokenSeq current = candidate;
  int shifts = 0;
  int base = levenshtein(current, reference);
  while (base > 0 && !current.empty()) {
    std::vector<std::pair<TokenSeq, int>> improving;  // arrangement, gain
    for_each_shift(current, [&](TokenSeq arr) {
      const int gain = base - levenshtein(arr, reference);
      if (gain >= 1) improving.emplace_back(std::move(arr), gain);
    });
    if (improving.empty()) break;
    std::size_t pick = 0;
    int best_score = -1, best_gain = -1;
    for (std::size_t i = 0; i < improving.size(); ++i) {
      const auto& [arr, gain] = improving[i];
      const int next = best_single_shift_improvement(arr, reference, base - gain);
      const int score = gain + next;
      if (score > best_score || (score == best_score && gain > best_gain)) {
        best_score = score;
        best_gain = gain;
        pick = i;
      }
    }
    current = std::move(improving[pick].first);
    base -= improving[pick].second;
    ++shifts;
  }
  return shifts + base;
}

// Shifts permute the candidate, so any arrangement still needs at least
// max(missing, extra) token edits against the reference multiset.
int multiset_edit_bound(const TokenSeq& candidate, const TokenSeq& reference) {
  std::unordered_map<std::string, int> diff;
  for (const std::string& t : candidate) ++diff[t];
  for (const std::string& t : reference) --diff[t];
  int extra = 0, missing = 0;
  for (const auto& [token, d] : diff) {
    if (d > 0) extra += d;
    if (d < 0) missing -= d;
  }
  return std::max(extra, missing);
}

std::string arrangement_key(const TokenSeq& seq) {
  std::string key;
  for (const std::string& t : seq) {
    key += t;
    key.push_back('\x1f');
  }
  return key;
}

int ter_edits_exact(const TokenSeq& candidate, const TokenSeq& reference) {
  int best = levenshtein(candidate, reference);
  const int bound = multiset_edit_bound(candidate, reference);
  std::unordered_set<std::string> visited{arrangement_key(candidate)};
  std::deque<TokenSeq> frontier{candidate};
  int shifts_done = 0;
  while (!frontier.empty()) {
    ++shifts_done;
    if (shifts_done + bound >= best) break;  // further shifts cannot win
    std::deque<TokenSeq> next;
    for (const TokenSeq& arr : frontier) {
      for_each_shift(arr, [&](TokenSeq shifted) {
        std::string key = arrangement_key(shifted);
        if (!visited.insert(std::move(key)).second) return;
        const int d = levenshtein(shifted, reference);
        best = std::min(best, shifts_done + d);
        next.push_back(std::move(shifted));
      });
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace

double ter(const TokenSeq& candidate, const TokenSeq& reference) {
  if (reference.empty()) throw DegenerateBatchError("ter requires a non-empty reference");
  return 100.0 * ter_edits_greedy(candidate, reference) /
         static_cast<double>(reference.size());
}

double ter_exact(const TokenSeq& candidate, const TokenSeq& reference) {
  if (reference.empty()) throw DegenerateBatchError("ter requires a non-empty reference");
  if (reference.size() > 10) {
    throw ParameterError("ter_exact is the short-reference oracle (reference <= 10 tokens)");
  }
  return 100.0 * ter_edits_exact(candidate, reference) /
         static_cast<double>(reference.size());
}

double ter_corpus(const std::vector<TokenSeq>& candidates,
                  const std::vector<TokenSeq>& references) {
  check_parallel(candidates.size(), references.size(), "ter corpora");
  check_nonempty(candidates.size(), "ter");
  double edits = 0.0, ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw DegenerateBatchError("ter requires non-empty references");
    edits += ter_edits_greedy(candidates[i], references[i]);
    ref_len += static_cast<double>(references[i].size());
  }
  return 100.0 * edits / ref_len;
}

// ---- chrF ----

namespace {

std::string strip_spaces(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != ' ') out.push_back(c);
  }
  return out;
}

std::unordered_map<std::string, int> char_ngram_counts(const std::string& s, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(s.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, static_cast<std::size_t>(n))];
  return counts;
}

TokenSeq split_spaces(const std::string& s) {
  TokenSeq out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// per order: [tp, cand_total, ref_total]
std::vector<double> chrf_sentence_stats(const std::string& cand, const std::string& ref,
                                        const ChrfOptions& options) {
  std::vector<double> stats;
  const std::string cs = strip_spaces(cand);
  const std::string rs = strip_spaces(ref);
  auto accumulate = [&stats](const std::unordered_map<std::string, int>& c,
                             const std::unordered_map<std::string, int>& r) {
    double tp = 0.0, ct = 0.0, rt = 0.0;
    for (const auto& [gram, count] : c) {
      ct += count;
      auto it = r.find(gram);
      if (it != r.end()) tp += std::min(count, it->second);
    }
    for (const auto& [gram, count] : r) rt += count;
    stats.push_back(tp);
    stats.push_back(ct);
    stats.push_back(rt);
  };
  for (int n = 1; n <= options.char_n; ++n) {
    accumulate(char_ngram_counts(cs, n), char_ngram_counts(rs, n));
  }
  const TokenSeq cw = split_spaces(cand);
  const TokenSeq rw = split_spaces(ref);
  for (int n = 1; n <= options.word_n; ++n) {
    std::unordered_map<std::string, int> c = ngram_counts(cw, n);
    std::unordered_map<std::string, int> r = ngram_counts(rw, n);
    accumulate(c, r);
  }
  return stats;
}

double chrf_from_stats(const std::vector<double>& stats, const ChrfOptions& options) {
  double p_sum = 0.0, r_sum = 0.0;
  int effective = 0;
  for (std::size_t base = 0; base + 3 <= stats.size(); base += 3) {
    const double tp = stats[base], ct = stats[base + 1], rt = stats[base + 2];
    if (ct == 0.0 && rt == 0.0) continue;  // order longer than both sides
    p_sum += ct > 0.0 ? tp / ct : 0.0;
    r_sum += rt > 0.0 ? tp / rt : 0.0;
    ++effective;
  }
  if (effective == 0) return 0.0;
  const double p = p_sum / effective;
  const double r = r_sum / effective;
  const double b2 = options.beta * options.beta;
  const double denom = b2 * p + r;
  return denom > 0.0 ? 100.0 * (1.0 + b2) * p * r / denom : 0.0;
}

}  // namespace

double chrf(const std::string& candidate, const std::string& reference, ChrfOptions options) {
  if (candidate.empty() || reference.empty()) {
    throw DegenerateBatchError("chrf requires non-empty candidate and reference");
  }
  return chrf_from_stats(chrf_sentence_stats(candidate, reference, options), options);
}

double chrf_corpus(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references, ChrfOptions options) {
  check_parallel(candidates.size(), references.size(), "chrf corpora");
  check_nonempty(candidates.size(), "chrf");
  std::vector<double> total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].empty() || references[i].empty()) {
      throw DegenerateBatchError("chrf requires non-empty candidate and reference");
    }
    const auto stats = chrf_sentence_stats(candidates[i], references[i], options);
    if (total.empty()) total.assign(stats.size(), 0.0);
    for (std::size_t j = 0; j < stats.size(); ++j) total[j] += stats[j];
  }
  return chrf_from_stats(total, options);
}

// ---- slot accuracy ----

double slot_answer_accuracy(const std::vector<TokenSeq>& predictions,
                            const std::vector<TokenSeq>& golds, const SlotLexicon& lexicon) {
  check_parallel(predictions.size(), golds.size(), "slot accuracy corpora");
  check_nonempty(predictions.size(), "slot_answer_accuracy");
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (extract_slot_names(predictions[i], lexicon) == extract_slot_names(golds[i], lexicon)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

// ---- paired bootstrap ----

BootstrapResult paired_bootstrap(const std::vector<TokenSeq>& system_a,
                                 const std::vector<TokenSeq>& system_b,
                                 const std::vector<TokenSeq>& references, const MetricFn& metric,
                                 int resamples, std::uint64_t seed) {
  check_parallel(system_a.size(), references.size(), "bootstrap system A");
  check_parallel(system_b.size(), references.size(), "bootstrap system B");
  check_nonempty(references.size(), "paired_bootstrap");
  if (resamples < 100) {
    throw ParameterError("paired bootstrap needs at least 100 resamples, got " +
                         std::to_string(resamples));
  }
  BootstrapResult result;
  result.score_a = metric(system_a, references);
  result.score_b = metric(system_b, references);
  result.delta = result.score_a - result.score_b;

  Rng rng(seed);
  const std::size_t n = references.size();
  int flips = 0;
  std::vector<TokenSeq> ra(n), rb(n), rr(n);
  for (int s = 0; s < resamples; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pick = rng.next_index(n);
      ra[i] = system_a[pick];
      rb[i] = system_b[pick];
      rr[i] = references[pick];
    }
    const double delta_r = metric(ra, rr) - metric(rb, rr);
    if (delta_r * result.delta <= 0.0) ++flips;
  }
  result.p_value = static_cast<double>(flips) / resamples;
  return result;
}

// ---- reports ----

std::string MetricsReport::to_json_string() const {
  nlohmann::json j{{"system", system}, {"sentence_count", sentence_count}, {"scores", scores}};
  if (!sentence_scores.empty()) j["sentence_scores"] = sentence_scores;
  if (comparison.has_value()) {
    j["comparison"] = {{"baseline", comparison->baseline},
                       {"baseline_scores", comparison->baseline_scores},
                       {"deltas", comparison->deltas},
                       {"p_values", comparison->p_values}};
  }
  return j.dump(2);
}

namespace {

struct StatMetric {
  std::string name;
  std::function<std::vector<double>(const TokenSeq&, const TokenSeq&)> sentence_stats;
  std::function<double(const std::vector<double>&)> corpus_score;
};

std::vector<StatMetric> standard_metrics(const SlotLexicon& lexicon) {
  std::vector<StatMetric> metrics;
  for (int n = 1; n <= 4; ++n) {
    metrics.push_back({"bleu-" + std::to_string(n),
                       [n](const TokenSeq& c, const TokenSeq& r) {
                         return bleu_sentence_stats(c, r, n);
                       },
                       [n](const std::vector<double>& s) {
                         return bleu_from_stats(s, n, 1e-9);
                       }});
  }
  metrics.push_back({"chrf",
                     [](const TokenSeq& c, const TokenSeq& r) {
                       return chrf_sentence_stats(join_tokens(c), join_tokens(r), ChrfOptions{});
                     },
                     [](const std::vector<double>& s) {
                       return chrf_from_stats(s, ChrfOptions{});
                     }});
  metrics.push_back({"ter",
                     [](const TokenSeq& c, const TokenSeq& r) {
                       return std::vector<double>{
                           static_cast<double>(ter_edits_greedy(c, r)),
                           static_cast<double>(r.size())};
                     },
                     [](const std::vector<double>& s) {
                       return s[1] > 0.0 ? 100.0 * s[0] / s[1] : 0.0;
                     }});
  metrics.push_back({"rouge-l",
                     [](const TokenSeq& c, const TokenSeq& r) {
                       return std::vector<double>{rouge_l(c, r), 1.0};
                     },
                     [](const std::vector<double>& s) { return s[0] / s[1]; }});
  metrics.push_back({"slot_accuracy",
                     [lexicon](const TokenSeq& c, const TokenSeq& r) {
                       const bool ok = extract_slot_names(c, lexicon) ==
                                       extract_slot_names(r, lexicon);
                       return std::vector<double>{ok ? 1.0 : 0.0, 1.0};
                     },
                     [](const std::vector<double>& s) { return s[0] / s[1]; }});
  return metrics;
}

}  // namespace

MetricsReport evaluate_outputs(const std::string& system_name,
                               const std::vector<TokenSeq>& candidates,
                               const std::vector<TokenSeq>& references,
                               const SlotLexicon& lexicon, const std::vector<TokenSeq>* baseline,
                               const std::string& baseline_name, int resamples,
                               std::uint64_t seed) {
  check_parallel(candidates.size(), references.size(), "evaluation corpora");
  check_nonempty(candidates.size(), "evaluate_outputs");
  if (baseline != nullptr) {
    check_parallel(baseline->size(), references.size(), "baseline corpus");
  }

  const std::vector<StatMetric> metrics = standard_metrics(lexicon);
  const std::size_t n = candidates.size();

  // per-sentence sufficient statistics, computed once
  std::vector<std::vector<std::vector<double>>> stats_a(metrics.size());
  std::vector<std::vector<std::vector<double>>> stats_b(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    stats_a[m].resize(n);
    if (baseline != nullptr) stats_b[m].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      stats_a[m][i] = metrics[m].sentence_stats(candidates[i], references[i]);
      if (baseline != nullptr) stats_b[m][i] = metrics[m].sentence_stats((*baseline)[i], references[i]);
    }
  }

  auto combine = [](const std::vector<std::vector<double>>& stats,
                    const std::vector<std::size_t>& indices) {
    std::vector<double> total(stats[0].size(), 0.0);
    for (std::size_t idx : indices) {
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += stats[idx][j];
    }
    return total;
  };

  std::vector<std::size_t> full(n);
  for (std::size_t i = 0; i < n; ++i) full[i] = i;

  MetricsReport report;
  report.system = system_name;
  report.sentence_count = static_cast<int>(n);
  std::vector<double> deltas(metrics.size(), 0.0);
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    report.scores[metrics[m].name] = metrics[m].corpus_score(combine(stats_a[m], full));
  }

  // per-sentence diagnostic scores for the sentence-level metrics
  for (std::size_t i = 0; i < n; ++i) {
    report.sentence_scores["rouge-l"].push_back(rouge_l(candidates[i], references[i]));
    report.sentence_scores["ter"].push_back(ter(candidates[i], references[i]));
  }

  if (baseline != nullptr) {
    MetricsReport::Comparison cmp;
    cmp.baseline = baseline_name;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      cmp.baseline_scores[metrics[m].name] = metrics[m].corpus_score(combine(stats_b[m], full));
      deltas[m] = report.scores[metrics[m].name] - cmp.baseline_scores[metrics[m].name];
      cmp.deltas[metrics[m].name] = deltas[m];
    }
    Rng rng(seed);
    std::vector<int> flips(metrics.size(), 0);
    std::vector<std::size_t> indices(n);
    for (int s = 0; s < resamples; ++s) {
      for (std::size_t i = 0; i < n; ++i) indices[i] = rng.next_index(n);
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        const double delta_r = metrics[m].corpus_score(combine(stats_a[m], indices)) -
                               metrics[m].corpus_score(combine(stats_b[m], indices));
        if (delta_r * deltas[m] <= 0.0) ++flips[m];
      }
    }
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      cmp.p_values[metrics[m].name] = static_cast<double>(flips[m]) / resamples;
    }
    report.comparison = std::move(cmp);
  }
  return report;
}

}  // namespace gat
