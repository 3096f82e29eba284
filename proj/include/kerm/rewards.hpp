#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kerm/labeler.hpp"

namespace kerm {

enum class F1Averaging { kMicro, kMacro };

struct LabelCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

LabelCounts count_labels(const std::array<bool, kCategoryCount>& generated,
                         const std::array<bool, kCategoryCount>& reference);

// 2TP / (2TP + FP + FN); 1.0 when neither side has a positive.
double f1_from_counts(const LabelCounts& counts);

double disease_reward_from_labels(const DiseaseLabels& generated, const DiseaseLabels& reference,
                                  UncertaintyPolicy policy, F1Averaging averaging = F1Averaging::kMicro);

double disease_reward(std::string_view generated, std::string_view reference,
                      const LabelLexicon& lexicon, UncertaintyPolicy policy,
                      F1Averaging averaging = F1Averaging::kMicro);

// Token-level F-measure over multisets of shared tokens. Symmetric, in [0,1].
double lexical_f_measure(std::string_view a, std::string_view b);

struct JudgeVerdict {
  double score = 0.0;
  bool degraded = false;  // remote judge failed, offline score used
  bool clamped = false;   // remote score outside [0,1] was clamped
};

class SentenceJudge {
 public:
  virtual ~SentenceJudge() = default;
  virtual JudgeVerdict judge(std::string_view generated, std::string_view reference) const = 0;
  virtual std::string mode() const = 0;
};

class OfflineJudge final : public SentenceJudge {
 public:
  JudgeVerdict judge(std::string_view generated, std::string_view reference) const override {
    return {lexical_f_measure(generated, reference), false, false};
  }
  std::string mode() const override { return "offline"; }
};

enum class JudgeMode { kOffline, kRemote };

struct JudgeConfig {
  JudgeMode mode = JudgeMode::kOffline;
  std::string endpoint;
  double timeout_seconds = 10.0;
  int retries = 2;
  std::string prompt_template;  // empty: default_judge_prompt()
};

const std::string& default_judge_prompt();

// Substitutes {generated} and {reference}.
std::string render_judge_prompt(std::string_view templ, std::string_view generated,
                                std::string_view reference);

// First decimal number in text, e.g. "Score: 0.85" -> 0.85.
std::optional<double> parse_first_decimal(std::string_view text);

// Extracts the reply text: "text", else choices[0].message.content, else
// choices[0].text.
std::optional<std::string> extract_reply_text(std::string_view body);

// POSTs {"prompt": ...} to the endpoint once per pair, retrying on transport
// errors and non-2xx replies. Exhausted retries or an unparsable reply fall
// back to the offline judge and mark the verdict degraded.
class RemoteJudge final : public SentenceJudge {
 public:
  explicit RemoteJudge(JudgeConfig config);
  JudgeVerdict judge(std::string_view generated, std::string_view reference) const override;
  std::string mode() const override { return "remote"; }

 private:
  JudgeConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

std::unique_ptr<SentenceJudge> make_judge(const JudgeConfig& config);

struct SentenceScore {
  std::string generated;
  std::string matched;
  double score = 0.0;
  bool degraded = false;
  bool clamped = false;
};

// Pairs each generated sentence with the reference sentence of highest
// lexical similarity (ties to the earliest) and scores the pair with the
// judge. An empty generated sentence or an empty reference scores 0.
std::vector<SentenceScore> sentence_reward(std::span<const std::string> generated_sentences,
                                           std::string_view reference, const SentenceJudge& judge);
std::vector<SentenceScore> sentence_reward(std::string_view generated, std::string_view reference,
                                           const SentenceJudge& judge);

enum class SentenceMode { kPerSentence, kReportMean };

struct BlendOptions {
  double alpha = 0.4;
  bool use_r_dis = true;
  bool use_r_sen = true;
  SentenceMode sentence_mode = SentenceMode::kPerSentence;
};

struct RewardTrace {
  double r_dis = 0.0;
  std::vector<SentenceScore> sentence_scores;
  std::vector<std::size_t> token_sentence;
  std::vector<double> per_token_reward;
  double alpha = 0.4;
  std::string labeler_policy;
  bool use_r_dis = true;
  bool use_r_sen = true;
  bool degraded = false;
  bool clamped = false;

  double mean_reward() const;
  double mean_sentence_score() const;
};

// R_t = (1 - alpha) r_dis + alpha s(t), where s(t) is the score of the
// sentence holding token t. With one component disabled the other is used at
// full weight.
std::vector<double> blend(double r_dis, std::span<const double> sentence_scores,
                          std::span<const std::size_t> token_sentence, const BlendOptions& options);

RewardTrace make_trace(double r_dis, std::vector<SentenceScore> scores,
                       std::vector<std::size_t> token_sentence, const BlendOptions& options,
                       UncertaintyPolicy policy);

std::string trace_to_json(const RewardTrace& trace);

}  // namespace kerm
