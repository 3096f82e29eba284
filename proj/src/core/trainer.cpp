#include "kerm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

void require_env(const TrainingConfig& config, const TrainingEnvironment& env) {
  if (!env.embedder || !env.lexicon || !env.judge)
    fail(ErrorCode::kInvalidArgument, "training environment needs an embedder, lexicon and judge");
  if (config.switches.use_mke && (!env.corpus || !env.index))
    fail(ErrorCode::kInvalidArgument, "use_mke requires a knowledge corpus and index");
}

void check_finite(double value, std::size_t step, const char* component) {
  if (!std::isfinite(value))
    throw TrainingError(step, component, "non-finite " + std::string(component) + " at step " + std::to_string(step));
}

}  // namespace

void TrainingConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidArgument, what); };
  if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must lie in [0,1]");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) bad("warmup_ratio must lie in [0,1)");
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (weight_decay < 0.0) bad("weight_decay must be non-negative");
  if (epochs == 0) bad("epochs must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (samples_per_example == 0) bad("samples_per_example must be positive");
  if (max_len == 0) bad("max_len must be positive");
  if (width == 0) bad("width must be positive");
  if (temperature < 0.0) bad("temperature must be non-negative");
  if (retrieval.k == 0 || retrieval.m == 0) bad("retrieval k and m must be positive");
  if (switches.use_rl && !switches.use_r_dis && !switches.use_r_sen)
    bad("use_rl needs at least one of use_r_dis and use_r_sen");
}

double lr_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup_steps) {
  if (step < warmup_steps) return static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return 1.0;
  double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

std::size_t warmup_steps_for(std::size_t total_steps, double warmup_ratio) {
  return static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
}

AdamW::AdamW(std::size_t size, double beta1, double beta2, double epsilon, double weight_decay)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    fail(ErrorCode::kDimensionMismatch, "optimizer state size mismatch");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] *= 1.0 - lr * weight_decay_;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    double mhat = m_[i] / bc1;
    double vhat = v_[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + epsilon_);
  }
}

Embedding record_condition(const TrainingRecord& record, const TrainingConfig& config,
                           const TrainingEnvironment& env, ComponentCounters* counters) {
  if (!config.switches.use_mke) return condition(record.image, {}, *env.embedder);
  if (counters) ++counters->mke;
  auto facts = mke(record.image, record.context, *env.index, *env.corpus, *env.embedder, config.retrieval);
  return condition(record.image, facts, *env.embedder);
}

RewardTrace score_actions(const Vocabulary& vocab, std::span<const TokenId> actions,
                          const std::string& reference, const BlendOptions& blend,
                          const TrainingConfig& config, const TrainingEnvironment& env,
                          ComponentCounters* counters) {
  Segmentation seg = segment_actions(vocab, actions);
  double r_dis = 0.0;
  if (blend.use_r_dis) {
    if (counters) ++counters->disease_reward;
    r_dis = disease_reward(vocab.decode(actions), reference, *env.lexicon, config.uncertainty_policy,
                           config.f1_averaging);
  }
  std::vector<SentenceScore> scores;
  if (blend.use_r_sen) {
    if (counters) ++counters->sentence_reward;
    scores = sentence_reward(std::span<const std::string>(seg.sentences), reference, *env.judge);
  } else {
    for (auto& s : seg.sentences) scores.push_back({std::move(s), {}, 0.0, false, false});
  }
  return make_trace(r_dis, std::move(scores), std::move(seg.token_sentence), blend, config.uncertainty_policy);
}

RewardTrace score_report(std::string_view generated, std::string_view reference, const LabelLexicon& lexicon,
                         const SentenceJudge& judge, const BlendOptions& blend, UncertaintyPolicy policy,
                         F1Averaging averaging) {
  std::vector<std::string> texts{std::string(generated)};
  Vocabulary vocab = Vocabulary::build(texts);
  auto ids = vocab.encode(generated);
  TrainingConfig config;
  config.uncertainty_policy = policy;
  config.f1_averaging = averaging;
  TrainingEnvironment env{nullptr, &lexicon, &judge, nullptr, nullptr};
  std::string ref(reference);
  return score_actions(vocab, std::span<const TokenId>(ids).subspan(1), ref, blend, config, env);
}

PolicyParams initial_params(const Vocabulary& vocab, const TrainingConfig& config,
                            std::size_t cond_dimension) {
  return PolicyParams::random({vocab.size(), config.width, cond_dimension},
                              derive_seed(config.seed, "init"), config.init_sigma);
}

TrainingResult train(std::span<const TrainingRecord> records, const TrainingConfig& config,
                     const TrainingEnvironment& env, const Vocabulary* vocab) {
  config.validate();
  require_env(config, env);
  if (records.empty()) fail(ErrorCode::kInvalidArgument, "training dataset is empty");

  TrainingResult result;
  if (vocab) {
    result.vocab = *vocab;
  } else {
    std::vector<std::string> refs;
    refs.reserve(records.size());
    for (const auto& r : records) refs.push_back(r.reference);
    result.vocab = Vocabulary::build(refs);
  }
  result.params = initial_params(result.vocab, config, env.embedder->dimension());
  PolicyParams& params = result.params;

  const std::size_t steps_per_epoch = (records.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const std::size_t warmup = warmup_steps_for(total_steps, config.warmup_ratio);
  AdamW optimizer(params.size(), config.beta1, config.beta2, config.epsilon, config.weight_decay);

  BlendOptions blend_options{config.alpha, config.switches.use_r_dis, config.switches.use_r_sen,
                             config.sentence_mode};
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle"));
  const std::uint64_t sample_seed = derive_seed(config.seed, "sample");
  double baseline = 0.0;
  bool baseline_ready = false;

  std::vector<std::size_t> order(records.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      std::size_t begin = b * config.batch_size;
      std::size_t end = std::min(begin + config.batch_size, order.size());
      double batch = static_cast<double>(end - begin);

      PolicyParams grad(params.shape());
      StepLog log;
      log.step = step;
      log.r_t_min = std::numeric_limits<double>::infinity();
      log.r_t_max = -std::numeric_limits<double>::infinity();
      std::size_t traces = 0;

      for (std::size_t idx = begin; idx < end; ++idx) {
        const TrainingRecord& rec = records[order[idx]];
        Embedding cond = record_condition(rec, config, env, &result.counters);

        auto reference = result.vocab.encode(rec.reference);
        ++result.counters.ce_gradient;
        LossAndGrad ce = ce_loss_and_grad(params, cond.values(), reference);
        log.l_ce += ce.loss / batch;
        for (std::size_t p = 0; p < grad.size(); ++p) grad.data()[p] += ce.grad.data()[p] / batch;

        if (!config.switches.use_rl) continue;
        for (std::size_t s = 0; s < config.samples_per_example; ++s) {
          ++result.counters.sampling;
          std::uint64_t seed = splitmix64(sample_seed ^ splitmix64(step * 1000003ULL + idx * 131ULL + s));
          Sample smp = sample(params, cond.values(), {config.max_len, config.temperature}, seed);
          auto actions = std::span<const TokenId>(smp.tokens).subspan(1);
          RewardTrace trace = score_actions(result.vocab, actions, rec.reference, blend_options, config, env,
                                            &result.counters);

          double b_value = config.switches.use_baseline && baseline_ready ? baseline : 0.0;
          ++result.counters.rl_gradient;
          LossAndGrad rl = rl_loss_and_grad(params, cond.values(), smp.tokens, trace.per_token_reward, b_value);
          double scale = config.rl_weight / (batch * static_cast<double>(config.samples_per_example));
          log.l_rl += rl.loss * scale;
          for (std::size_t p = 0; p < grad.size(); ++p) grad.data()[p] += rl.grad.data()[p] * scale;

          double mean = trace.mean_reward();
          if (config.switches.use_baseline) {
            baseline = baseline_ready ? config.baseline_momentum * baseline + (1.0 - config.baseline_momentum) * mean
                                      : mean;
            baseline_ready = true;
          }
          log.mean_r_dis += trace.r_dis;
          log.mean_r_sen += trace.mean_sentence_score();
          log.mean_reward += mean;
          for (double r : trace.per_token_reward) {
            log.r_t_min = std::min(log.r_t_min, r);
            log.r_t_max = std::max(log.r_t_max, r);
          }
          ++traces;
        }
      }
      if (traces) {
        log.mean_r_dis /= static_cast<double>(traces);
        log.mean_r_sen /= static_cast<double>(traces);
        log.mean_reward /= static_cast<double>(traces);
      } else {
        log.r_t_min = log.r_t_max = 0.0;
      }
      log.l = log.l_ce + log.l_rl;
      check_finite(log.l_ce, step, "l_ce");
      check_finite(log.l_rl, step, "l_rl");
      for (double g : grad.data()) check_finite(g, step, "gradient");

      log.lr = config.learning_rate * lr_schedule(step, total_steps, warmup);
      optimizer.step(params.data(), grad.data(), log.lr);
      result.log.push_back(log);
    }
  }
  return result;
}

PolicyEvaluation evaluate_policy(const PolicyParams& params, const Vocabulary& vocab,
                                 std::span<const TrainingRecord> records, const TrainingConfig& config,
                                 const TrainingEnvironment& env) {
  require_env(config, env);
  if (records.empty()) fail(ErrorCode::kInvalidArgument, "evaluation set is empty");
  PolicyEvaluation out;
  BlendOptions blend_options{config.alpha, true, true, config.sentence_mode};
  std::vector<std::string> references;
  for (const auto& rec : records) {
    Embedding cond = record_condition(rec, config, env);
    Sample greedy = sample(params, cond.values(), {config.max_len, 0.0}, 0);
    auto actions = std::span<const TokenId>(greedy.tokens).subspan(1);
    RewardTrace trace = score_actions(vocab, actions, rec.reference, blend_options, config, env);
    out.mean_reward += trace.mean_reward();
    out.mean_r_dis += trace.r_dis;
    out.mean_r_sen += trace.mean_sentence_score();
    out.generated.push_back(vocab.decode(actions));
    references.push_back(rec.reference);
  }
  double n = static_cast<double>(records.size());
  out.mean_reward /= n;
  out.mean_r_dis /= n;
  out.mean_r_sen /= n;
  out.report = evaluate_reports(out.generated, references, *env.lexicon, config.uncertainty_policy);
  return out;
}

std::string step_log_to_json(const StepLog& l) {
  nlohmann::ordered_json j = {{"step", l.step},           {"l_ce", l.l_ce},
                              {"l_rl", l.l_rl},           {"l", l.l},
                              {"mean_r_dis", l.mean_r_dis}, {"mean_r_sen", l.mean_r_sen},
                              {"mean_reward", l.mean_reward}, {"r_t_min", l.r_t_min},
                              {"r_t_max", l.r_t_max},     {"lr", l.lr}};
  return j.dump();
}

std::string training_log_to_jsonl(std::span<const StepLog> log) {
  std::string out;
  for (const auto& l : log) out += step_log_to_json(l) + "\n";
  return out;
}

}  // namespace kerm
