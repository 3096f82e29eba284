#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kerm/labeler.hpp"
#include "kerm/rewards.hpp"

namespace kerm {

struct BleuOptions {
  // Add-one smoothing of orders >= 2. Off gives the classical definition.
  bool smoothing = false;
};

// Corpus-level BLEU-n over the shared tokenizer: clipped n-gram counts and
// lengths are summed over the corpus before the geometric mean and the
// brevity penalty exp(1 - r/c) for c < r.
double bleu(std::span<const std::string> candidates, std::span<const std::string> references,
            int n, BleuOptions options = {});

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// LCS F-measure for one pair, (1 + b^2) P R / (R + b^2 P).
double rouge_l_pair(const std::string& candidate, const std::string& reference, double beta = 1.2);

// Mean of rouge_l_pair over the corpus.
double rouge_l(std::span<const std::string> candidates, std::span<const std::string> references,
               double beta = 1.2);

struct ClinicalEfficacy {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  LabelCounts counts;
};

// Micro P/R/F1 over positive labels of all categories and reports. With no
// positives on either side the corpus scores (1, 1, 1).
ClinicalEfficacy clinical_efficacy(std::span<const std::string> candidates,
                                   std::span<const std::string> references,
                                   const LabelLexicon& lexicon, UncertaintyPolicy policy);

struct ExampleBreakdown {
  double bleu_4 = 0.0;  // sentence-level, unsmoothed
  double rouge_l = 0.0;
  LabelCounts counts;
};

struct EvalReport {
  double bleu_1 = 0.0, bleu_2 = 0.0, bleu_3 = 0.0, bleu_4 = 0.0;
  double rouge_l = 0.0;
  double ce_precision = 0.0, ce_recall = 0.0, ce_f1 = 0.0;
  std::vector<ExampleBreakdown> per_example;
};

EvalReport evaluate_reports(std::span<const std::string> candidates,
                            std::span<const std::string> references, const LabelLexicon& lexicon,
                            UncertaintyPolicy policy, bool per_example = false);

std::string eval_report_to_json(const EvalReport& report, bool per_example = false);

}  // namespace kerm
