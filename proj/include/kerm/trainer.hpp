#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kerm/corpus.hpp"
#include "kerm/dataset.hpp"
#include "kerm/embedding.hpp"
#include "kerm/error.hpp"
#include "kerm/labeler.hpp"
#include "kerm/metrics.hpp"
#include "kerm/policy.hpp"
#include "kerm/retrieval.hpp"
#include "kerm/rewards.hpp"

namespace kerm {

struct TrainingSwitches {
  bool use_mke = true;
  bool use_rl = true;
  bool use_r_dis = true;
  bool use_r_sen = true;
  bool use_baseline = false;

  bool operator==(const TrainingSwitches&) const = default;
};

struct TrainingConfig {
  double alpha = 0.4;
  double learning_rate = 2e-4;
  double weight_decay = 0.02;
  double warmup_ratio = 0.03;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::size_t samples_per_example = 1;
  std::uint64_t seed = 1;
  double rl_weight = 1.0;
  double temperature = 1.0;
  double init_sigma = 0.02;
  double baseline_momentum = 0.9;
  std::size_t max_len = 48;
  std::size_t width = 32;
  TrainingSwitches switches;
  RetrievalSettings retrieval;
  UncertaintyPolicy uncertainty_policy = UncertaintyPolicy::kUncertainPositive;
  F1Averaging f1_averaging = F1Averaging::kMicro;
  SentenceMode sentence_mode = SentenceMode::kPerSentence;

  void validate() const;
};

// Multiplier on the base learning rate: linear warmup from 0 to 1 over
// warmup_steps, then cosine decay towards 0 at total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup_steps);
std::size_t warmup_steps_for(std::size_t total_steps, double warmup_ratio);

// AdamW with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::size_t size, double beta1, double beta2, double epsilon, double weight_decay);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, epsilon_, weight_decay_;
  std::size_t t_ = 0;
};

struct TrainingEnvironment {
  const Embedder* embedder = nullptr;
  const LabelLexicon* lexicon = nullptr;
  const SentenceJudge* judge = nullptr;
  const KnowledgeCorpus* corpus = nullptr;  // required when use_mke
  const RetrievalIndex* index = nullptr;    // required when use_mke
};

// Number of times each optional stage ran.
struct ComponentCounters {
  std::size_t mke = 0;
  std::size_t sampling = 0;
  std::size_t disease_reward = 0;
  std::size_t sentence_reward = 0;
  std::size_t rl_gradient = 0;
  std::size_t ce_gradient = 0;

  bool operator==(const ComponentCounters&) const = default;
};

struct StepLog {
  std::size_t step = 0;
  double l_ce = 0.0;
  double l_rl = 0.0;
  double l = 0.0;
  double mean_r_dis = 0.0;
  double mean_r_sen = 0.0;
  double mean_reward = 0.0;
  double r_t_min = 0.0;
  double r_t_max = 0.0;
  double lr = 0.0;
};

struct TrainingResult {
  PolicyParams params;
  Vocabulary vocab;
  std::vector<StepLog> log;
  ComponentCounters counters;
};

class TrainingError : public Error {
 public:
  TrainingError(std::size_t step, std::string component, const std::string& what)
      : Error(ErrorCode::kNumeric, what), step_(step), component_(std::move(component)) {}
  std::size_t step() const { return step_; }
  const std::string& component() const { return component_; }

 private:
  std::size_t step_;
  std::string component_;
};

// Conditioning for a record: MKE facts pooled with the image when use_mke.
Embedding record_condition(const TrainingRecord& record, const TrainingConfig& config,
                           const TrainingEnvironment& env, ComponentCounters* counters = nullptr);

// Rewards for a generated action sequence against a reference, honouring the
// switches (a disabled component is never computed).
RewardTrace score_actions(const Vocabulary& vocab, std::span<const TokenId> actions,
                          const std::string& reference, const BlendOptions& blend,
                          const TrainingConfig& config, const TrainingEnvironment& env,
                          ComponentCounters* counters = nullptr);

// Scores free text: the generated report is tokenized as the policy would
// emit it, so per_token_reward has one entry per word or punctuation token
// plus the final end token.
RewardTrace score_report(std::string_view generated, std::string_view reference, const LabelLexicon& lexicon,
                         const SentenceJudge& judge, const BlendOptions& blend, UncertaintyPolicy policy,
                         F1Averaging averaging = F1Averaging::kMicro);

// Minimizes L = L_CE + rl_weight * L_RL. vocab defaults to one built from the
// references.
TrainingResult train(std::span<const TrainingRecord> records, const TrainingConfig& config,
                     const TrainingEnvironment& env, const Vocabulary* vocab = nullptr);

// Fresh parameters exactly as train() initializes them.
PolicyParams initial_params(const Vocabulary& vocab, const TrainingConfig& config,
                            std::size_t cond_dimension);

struct PolicyEvaluation {
  double mean_reward = 0.0;
  double mean_r_dis = 0.0;
  double mean_r_sen = 0.0;
  EvalReport report;
  std::vector<std::string> generated;
};

// Greedy decoding on each record; rewards use the full blend at config.alpha.
PolicyEvaluation evaluate_policy(const PolicyParams& params, const Vocabulary& vocab,
                                 std::span<const TrainingRecord> records, const TrainingConfig& config,
                                 const TrainingEnvironment& env);

std::string step_log_to_json(const StepLog& log);
std::string training_log_to_jsonl(std::span<const StepLog> log);

}  // namespace kerm
