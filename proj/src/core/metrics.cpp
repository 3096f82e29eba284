#include "kerm/metrics.hpp"

#include <array>
#include <cmath>
#include <map>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

void check_corpus(std::span<const std::string> candidates, std::span<const std::string> references) {
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "empty candidate list");
  if (candidates.size() != references.size())
    fail(ErrorCode::kInvalidArgument, "candidate and reference counts differ");
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, int> counts;
  auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + len))];
  return counts;
}

struct BleuStats {
  std::array<double, 4> matches{};
  std::array<double, 4> totals{};
  double cand_len = 0;
  double ref_len = 0;

  void add(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n) {
    cand_len += static_cast<double>(cand.size());
    ref_len += static_cast<double>(ref.size());
    for (int k = 1; k <= n; ++k) {
      auto c = ngram_counts(cand, k);
      auto r = ngram_counts(ref, k);
      for (const auto& [gram, count] : c) {
        auto it = r.find(gram);
        if (it != r.end()) matches[k - 1] += std::min(count, it->second);
        totals[k - 1] += count;
      }
    }
  }

  double score(int n, bool smoothing) const {
    if (cand_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
      double m = matches[k - 1], t = totals[k - 1];
      if (smoothing && k > 1) {
        m += 1.0;
        t += 1.0;
      }
      if (m == 0.0 || t == 0.0) return 0.0;
      log_sum += std::log(m / t);
    }
    double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
    return bp * std::exp(log_sum / n);
  }
};

}  // namespace

double bleu(std::span<const std::string> candidates, std::span<const std::string> references, int n,
            BleuOptions options) {
  check_corpus(candidates, references);
  if (n < 1 || n > 4) fail(ErrorCode::kInvalidArgument, "BLEU order must be in 1..4");
  BleuStats stats;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    stats.add(tokenize(candidates[i]), tokenize(references[i]), n);
  return stats.score(n, options.smoothing);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_pair(const std::string& candidate, const std::string& reference, double beta) {
  auto c = tokenize(candidate);
  auto r = tokenize(reference);
  std::size_t lcs = lcs_length(c, r);
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(c.size());
  double rec = static_cast<double>(lcs) / static_cast<double>(r.size());
  double b2 = beta * beta;
  return (1.0 + b2) * p * rec / (rec + b2 * p);
}

double rouge_l(std::span<const std::string> candidates, std::span<const std::string> references,
               double beta) {
  check_corpus(candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += rouge_l_pair(candidates[i], references[i], beta);
  return sum / static_cast<double>(candidates.size());
}

ClinicalEfficacy clinical_efficacy(std::span<const std::string> candidates,
                                   std::span<const std::string> references,
                                   const LabelLexicon& lexicon, UncertaintyPolicy policy) {
  check_corpus(candidates, references);
  ClinicalEfficacy ce;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto c = count_labels(binarize(label_report(candidates[i], lexicon), policy),
                          binarize(label_report(references[i], lexicon), policy));
    ce.counts.tp += c.tp;
    ce.counts.fp += c.fp;
    ce.counts.fn += c.fn;
  }
  const auto& k = ce.counts;
  if (k.tp + k.fp + k.fn == 0) {
    ce.precision = ce.recall = ce.f1 = 1.0;
    return ce;
  }
  ce.precision = k.tp + k.fp == 0 ? 0.0 : static_cast<double>(k.tp) / (k.tp + k.fp);
  ce.recall = k.tp + k.fn == 0 ? 0.0 : static_cast<double>(k.tp) / (k.tp + k.fn);
  ce.f1 = ce.precision + ce.recall == 0.0 ? 0.0
                                          : 2.0 * ce.precision * ce.recall / (ce.precision + ce.recall);
  return ce;
}

EvalReport evaluate_reports(std::span<const std::string> candidates,
                            std::span<const std::string> references, const LabelLexicon& lexicon,
                            UncertaintyPolicy policy, bool per_example) {
  check_corpus(candidates, references);
  EvalReport r;
  r.bleu_1 = bleu(candidates, references, 1);
  r.bleu_2 = bleu(candidates, references, 2);
  r.bleu_3 = bleu(candidates, references, 3);
  r.bleu_4 = bleu(candidates, references, 4);
  r.rouge_l = rouge_l(candidates, references);
  auto ce = clinical_efficacy(candidates, references, lexicon, policy);
  r.ce_precision = ce.precision;
  r.ce_recall = ce.recall;
  r.ce_f1 = ce.f1;
  if (per_example) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      ExampleBreakdown b;
      b.bleu_4 = bleu(candidates.subspan(i, 1), references.subspan(i, 1), 4);
      b.rouge_l = rouge_l_pair(candidates[i], references[i]);
      b.counts = count_labels(binarize(label_report(candidates[i], lexicon), policy),
                              binarize(label_report(references[i], lexicon), policy));
      r.per_example.push_back(b);
    }
  }
  return r;
}

std::string eval_report_to_json(const EvalReport& r, bool per_example) {
  nlohmann::ordered_json j = {{"bleu_1", r.bleu_1},           {"bleu_2", r.bleu_2},
                              {"bleu_3", r.bleu_3},           {"bleu_4", r.bleu_4},
                              {"rouge_l", r.rouge_l},         {"ce_precision", r.ce_precision},
                              {"ce_recall", r.ce_recall},     {"ce_f1", r.ce_f1}};
  if (per_example) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.per_example.size(); ++i) {
      const auto& b = r.per_example[i];
      rows.push_back({{"index", i},
                      {"bleu_4", b.bleu_4},
                      {"rouge_l", b.rouge_l},
                      {"tp", b.counts.tp},
                      {"fp", b.counts.fp},
                      {"fn", b.counts.fn}});
    }
    j["per_example"] = rows;
  }
  return j.dump();
}

}  // namespace kerm
