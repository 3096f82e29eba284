#include "kerm/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/text.hpp"

namespace kerm {

LabelCounts count_labels(const std::array<bool, kCategoryCount>& generated,
                         const std::array<bool, kCategoryCount>& reference) {
  LabelCounts c;
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    if (generated[i] && reference[i]) ++c.tp;
    else if (generated[i]) ++c.fp;
    else if (reference[i]) ++c.fn;
  }
  return c;
}

double f1_from_counts(const LabelCounts& c) {
  int denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * c.tp / denom;
}

double disease_reward_from_labels(const DiseaseLabels& generated, const DiseaseLabels& reference,
                                  UncertaintyPolicy policy, F1Averaging averaging) {
  auto g = binarize(generated, policy);
  auto r = binarize(reference, policy);
  if (averaging == F1Averaging::kMicro) return f1_from_counts(count_labels(g, r));

  // Macro: mean per-category F1 over categories positive on either side.
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    if (!g[i] && !r[i]) continue;
    sum += (g[i] && r[i]) ? 1.0 : 0.0;
    ++n;
  }
  return n == 0 ? 1.0 : sum / n;
}

double disease_reward(std::string_view generated, std::string_view reference,
                      const LabelLexicon& lexicon, UncertaintyPolicy policy, F1Averaging averaging) {
  return disease_reward_from_labels(label_report(generated, lexicon), label_report(reference, lexicon),
                                    policy, averaging);
}

double lexical_f_measure(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : tb) ++counts[t];
  int overlap = 0;
  for (const auto& t : ta) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / static_cast<double>(ta.size());
  double r = static_cast<double>(overlap) / static_cast<double>(tb.size());
  return 2.0 * p * r / (p + r);
}

std::vector<SentenceScore> sentence_reward(std::span<const std::string> generated_sentences,
                                           std::string_view reference, const SentenceJudge& judge) {
  std::vector<std::string> refs = split_sentences(reference);
  std::vector<SentenceScore> out;
  out.reserve(generated_sentences.size());
  for (const std::string& gen : generated_sentences) {
    SentenceScore s;
    s.generated = gen;
    if (refs.empty() || tokenize(gen).empty()) {
      out.push_back(std::move(s));
      continue;
    }
    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      double sim = lexical_f_measure(gen, refs[i]);
      if (sim > best_sim) {
        best_sim = sim;
        best = i;
      }
    }
    s.matched = refs[best];
    JudgeVerdict v = judge.judge(gen, s.matched);
    s.score = v.score;
    s.degraded = v.degraded;
    s.clamped = v.clamped;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SentenceScore> sentence_reward(std::string_view generated, std::string_view reference,
                                           const SentenceJudge& judge) {
  auto sentences = split_sentences(generated);
  return sentence_reward(std::span<const std::string>(sentences), reference, judge);
}

std::vector<double> blend(double r_dis, std::span<const double> sentence_scores,
                          std::span<const std::size_t> token_sentence, const BlendOptions& options) {
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0))
    fail(ErrorCode::kInvalidArgument, "alpha must lie in [0,1]");
  if (!options.use_r_dis && !options.use_r_sen)
    fail(ErrorCode::kInvalidArgument, "at least one reward component must be enabled");

  double report_mean = 0.0;
  if (!sentence_scores.empty())
    report_mean = std::accumulate(sentence_scores.begin(), sentence_scores.end(), 0.0) /
                  static_cast<double>(sentence_scores.size());

  std::vector<double> out(token_sentence.size());
  for (std::size_t t = 0; t < token_sentence.size(); ++t) {
    std::size_t s = token_sentence[t];
    if (s >= sentence_scores.size())
      fail(ErrorCode::kInvalidArgument, "token " + std::to_string(t) + " is not aligned to a sentence");
    double r_sen = options.sentence_mode == SentenceMode::kReportMean ? report_mean : sentence_scores[s];
    if (!options.use_r_sen) out[t] = r_dis;
    else if (!options.use_r_dis) out[t] = r_sen;
    else out[t] = (1.0 - options.alpha) * r_dis + options.alpha * r_sen;
  }
  return out;
}

double RewardTrace::mean_reward() const {
  if (per_token_reward.empty()) return 0.0;
  return std::accumulate(per_token_reward.begin(), per_token_reward.end(), 0.0) /
         static_cast<double>(per_token_reward.size());
}

double RewardTrace::mean_sentence_score() const {
  if (sentence_scores.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : sentence_scores) s += x.score;
  return s / static_cast<double>(sentence_scores.size());
}

RewardTrace make_trace(double r_dis, std::vector<SentenceScore> scores,
                       std::vector<std::size_t> token_sentence, const BlendOptions& options,
                       UncertaintyPolicy policy) {
  RewardTrace trace;
  trace.r_dis = r_dis;
  trace.alpha = options.alpha;
  trace.use_r_dis = options.use_r_dis;
  trace.use_r_sen = options.use_r_sen;
  trace.labeler_policy = std::string(policy_name(policy));
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) {
    values.push_back(s.score);
    trace.degraded = trace.degraded || s.degraded;
    trace.clamped = trace.clamped || s.clamped;
  }
  trace.per_token_reward = blend(r_dis, values, token_sentence, options);
  trace.sentence_scores = std::move(scores);
  trace.token_sentence = std::move(token_sentence);
  return trace;
}

std::string trace_to_json(const RewardTrace& trace) {
  nlohmann::ordered_json j;
  j["r_dis"] = trace.r_dis;
  j["alpha"] = trace.alpha;
  j["labeler_policy"] = trace.labeler_policy;
  j["use_r_dis"] = trace.use_r_dis;
  j["use_r_sen"] = trace.use_r_sen;
  j["degraded"] = trace.degraded;
  j["clamped"] = trace.clamped;
  auto scores = nlohmann::ordered_json::array();
  for (const auto& s : trace.sentence_scores)
    scores.push_back({{"generated", s.generated},
                      {"matched", s.matched},
                      {"score", s.score},
                      {"degraded", s.degraded},
                      {"clamped", s.clamped}});
  j["sentence_scores"] = scores;
  j["token_sentence"] = trace.token_sentence;
  j["per_token_reward"] = trace.per_token_reward;
  j["mean_reward"] = trace.mean_reward();
  return j.dump();
}

}  // namespace kerm
