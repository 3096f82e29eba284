#include "kerm/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kParse, "config key '" + key + "' has the wrong type");
  }
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(ErrorCode::kParse, "config key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

std::filesystem::path as_path(const json& v, const std::string& key, const std::filesystem::path& base) {
  std::filesystem::path p = as<std::string>(v, key);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void apply_key(ExperimentConfig& c, const std::string& key, const json& v, const std::filesystem::path& base) {
  TrainingConfig& t = c.training;
  if (key == "alpha") t.alpha = as<double>(v, key);
  else if (key == "learning_rate") t.learning_rate = as<double>(v, key);
  else if (key == "weight_decay") t.weight_decay = as<double>(v, key);
  else if (key == "warmup_ratio") t.warmup_ratio = as<double>(v, key);
  else if (key == "beta1") t.beta1 = as<double>(v, key);
  else if (key == "beta2") t.beta2 = as<double>(v, key);
  else if (key == "epsilon") t.epsilon = as<double>(v, key);
  else if (key == "epochs") t.epochs = as_count(v, key);
  else if (key == "batch_size") t.batch_size = as_count(v, key);
  else if (key == "samples_per_example") t.samples_per_example = as_count(v, key);
  else if (key == "seed") t.seed = as<std::uint64_t>(v, key);
  else if (key == "rl_weight") t.rl_weight = as<double>(v, key);
  else if (key == "temperature") t.temperature = as<double>(v, key);
  else if (key == "init_sigma") t.init_sigma = as<double>(v, key);
  else if (key == "baseline_momentum") t.baseline_momentum = as<double>(v, key);
  else if (key == "max_len") t.max_len = as_count(v, key);
  else if (key == "width") t.width = as_count(v, key);
  else if (key == "use_mke") t.switches.use_mke = as<bool>(v, key);
  else if (key == "use_rl") t.switches.use_rl = as<bool>(v, key);
  else if (key == "use_r_dis") t.switches.use_r_dis = as<bool>(v, key);
  else if (key == "use_r_sen") t.switches.use_r_sen = as<bool>(v, key);
  else if (key == "use_baseline") t.switches.use_baseline = as<bool>(v, key);
  else if (key == "k") t.retrieval.k = as_count(v, key);
  else if (key == "m") t.retrieval.m = as_count(v, key);
  else if (key == "uncertainty_policy") t.uncertainty_policy = policy_from_name(as<std::string>(v, key));
  else if (key == "f1_averaging") {
    auto s = as<std::string>(v, key);
    if (s == "micro") t.f1_averaging = F1Averaging::kMicro;
    else if (s == "macro") t.f1_averaging = F1Averaging::kMacro;
    else fail(ErrorCode::kParse, "f1_averaging must be micro or macro");
  } else if (key == "sentence_mode") {
    auto s = as<std::string>(v, key);
    if (s == "per-sentence") t.sentence_mode = SentenceMode::kPerSentence;
    else if (s == "report-mean") t.sentence_mode = SentenceMode::kReportMean;
    else fail(ErrorCode::kParse, "sentence_mode must be per-sentence or report-mean");
  }
  else if (key == "dataset_size") c.dataset_size = as_count(v, key);
  else if (key == "holdout_fraction") c.holdout_fraction = as<double>(v, key);
  else if (key == "dimension") c.dimension = as_count(v, key);
  else if (key == "image_sigma") c.image_sigma = as<double>(v, key);
  else if (key == "judge") {
    auto s = as<std::string>(v, key);
    if (s == "offline") c.judge.mode = JudgeMode::kOffline;
    else if (s == "remote") c.judge.mode = JudgeMode::kRemote;
    else fail(ErrorCode::kParse, "judge must be offline or remote");
  }
  else if (key == "judge_endpoint") c.judge.endpoint = as<std::string>(v, key);
  else if (key == "judge_timeout") c.judge.timeout_seconds = as<double>(v, key);
  else if (key == "judge_retries") c.judge.retries = static_cast<int>(as_count(v, key));
  else if (key == "judge_prompt") c.judge.prompt_template = as<std::string>(v, key);
  else if (key == "lexicon") c.lexicon_path = as_path(v, key, base);
  else if (key == "dataset") c.dataset_path = as_path(v, key, base);
  else if (key == "corpus") c.corpus_path = as_path(v, key, base);
  else if (key == "index") c.index_path = as_path(v, key, base);
  else fail(ErrorCode::kParse, "unknown config key '" + key + "'");
}

std::string sentence_mode_name(SentenceMode m) {
  return m == SentenceMode::kPerSentence ? "per-sentence" : "report-mean";
}

}  // namespace

void ExperimentConfig::validate() const {
  training.validate();
  if (dataset_path.empty() && dataset_size < 2) fail(ErrorCode::kInvalidArgument, "dataset_size must be at least 2");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    fail(ErrorCode::kInvalidArgument, "holdout_fraction must lie in (0,1)");
  if (dimension == 0) fail(ErrorCode::kInvalidArgument, "dimension must be positive");
  if (!(image_sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "image_sigma must be non-negative");
  if (judge.mode == JudgeMode::kRemote && judge.endpoint.empty())
    fail(ErrorCode::kInvalidArgument, "remote judge requires judge_endpoint");
  if (!index_path.empty() && corpus_path.empty())
    fail(ErrorCode::kInvalidArgument, "an index file needs its corpus file");
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir) {
  std::string raw(trim(value));
  json parsed = json::parse(raw, nullptr, false);
  if (parsed.is_discarded()) parsed = raw;
  apply_key(config, std::string(trim(key)), parsed, base_dir);
}

ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, std::string("config: ") + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it) apply_key(config, it.key(), it.value(), base_dir);
  } else {
    auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string_view line = lines[i];
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        fail(ErrorCode::kParse, "config line " + std::to_string(i + 1) + ": expected key=value");
      set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1), base_dir);
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(io::read_file(path), path.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  const TrainingConfig& t = c.training;
  nlohmann::ordered_json j;
  j["alpha"] = t.alpha;
  j["learning_rate"] = t.learning_rate;
  j["weight_decay"] = t.weight_decay;
  j["warmup_ratio"] = t.warmup_ratio;
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["epsilon"] = t.epsilon;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["samples_per_example"] = t.samples_per_example;
  j["seed"] = t.seed;
  j["rl_weight"] = t.rl_weight;
  j["temperature"] = t.temperature;
  j["init_sigma"] = t.init_sigma;
  j["baseline_momentum"] = t.baseline_momentum;
  j["max_len"] = t.max_len;
  j["width"] = t.width;
  j["use_mke"] = t.switches.use_mke;
  j["use_rl"] = t.switches.use_rl;
  j["use_r_dis"] = t.switches.use_r_dis;
  j["use_r_sen"] = t.switches.use_r_sen;
  j["use_baseline"] = t.switches.use_baseline;
  j["k"] = t.retrieval.k;
  j["m"] = t.retrieval.m;
  j["uncertainty_policy"] = std::string(policy_name(t.uncertainty_policy));
  j["f1_averaging"] = t.f1_averaging == F1Averaging::kMicro ? "micro" : "macro";
  j["sentence_mode"] = sentence_mode_name(t.sentence_mode);
  j["dataset_size"] = c.dataset_size;
  j["holdout_fraction"] = c.holdout_fraction;
  j["dimension"] = c.dimension;
  j["image_sigma"] = c.image_sigma;
  j["judge"] = c.judge.mode == JudgeMode::kOffline ? "offline" : "remote";
  j["judge_endpoint"] = c.judge.endpoint;
  j["judge_timeout"] = c.judge.timeout_seconds;
  j["judge_retries"] = c.judge.retries;
  j["lexicon"] = c.lexicon_path.string();
  j["dataset"] = c.dataset_path.string();
  j["corpus"] = c.corpus_path.string();
  j["index"] = c.index_path.string();
  return j.dump(2) + "\n";
}

void check_input_paths(const ExperimentConfig& c) {
  for (const auto* p : {&c.lexicon_path, &c.dataset_path, &c.corpus_path, &c.index_path}) {
    if (!p->empty() && !std::filesystem::is_regular_file(*p))
      fail(ErrorCode::kIo, "input file not found: " + p->string());
  }
}

void check_output_path(const std::filesystem::path& path) {
  if (path.empty()) fail(ErrorCode::kInvalidArgument, "output path is empty");
  auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    fail(ErrorCode::kIo, "output directory does not exist: " + parent.string());
}

ExperimentData::ExperimentData(const ExperimentConfig& config) {
  config.validate();
  check_input_paths(config);
  const std::uint64_t seed = config.training.seed;

  lexicon_ = config.lexicon_path.empty() ? default_lexicon() : load_lexicon(config.lexicon_path);
  embedder_ = std::make_unique<HashingEmbedder>(
      config.dimension, ImageSynthesis{config.image_sigma, derive_seed(seed, "image")});
  judge_ = make_judge(config.judge);

  std::vector<TrainingRecord> records;
  if (config.dataset_path.empty()) {
    SyntheticOptions opts;
    opts.n = config.dataset_size;
    opts.seed = derive_seed(seed, "data");
    records = make_synthetic_dataset(opts, lexicon_, *embedder_);
  } else {
    records = load_dataset(config.dataset_path);
  }
  if (records.size() < 2) fail(ErrorCode::kInvalidArgument, "dataset needs at least 2 records");
  auto holdout = static_cast<std::size_t>(std::ceil(config.holdout_fraction * static_cast<double>(records.size())));
  holdout = std::clamp<std::size_t>(holdout, 1, records.size() - 1);
  train_.assign(records.begin(), records.end() - static_cast<std::ptrdiff_t>(holdout));
  holdout_.assign(records.end() - static_cast<std::ptrdiff_t>(holdout), records.end());

  std::vector<std::string> refs;
  refs.reserve(train_.size());
  for (const auto& r : train_) refs.push_back(r.reference);
  vocab_ = Vocabulary::build(refs);

  if (config.corpus_path.empty()) {
    corpus_ = build_corpus(refs);
  } else {
    corpus_ = load_corpus(config.corpus_path);
  }
  if (config.index_path.empty()) {
    index_ = RetrievalIndex::build(corpus_, *embedder_);
  } else {
    index_ = RetrievalIndex::load(config.index_path);
    if (index_.corpus_fingerprint() != corpus_.fingerprint())
      fail(ErrorCode::kInvalidArgument, "index was built for a different corpus");
    if (index_.dimension() != embedder_->dimension())
      fail(ErrorCode::kDimensionMismatch, "index dimension does not match the embedder");
  }
}

TrainingEnvironment ExperimentData::environment() const {
  return {embedder_.get(), &lexicon_, judge_.get(), &corpus_, &index_};
}

ExperimentResult run_experiment(const ExperimentData& data, const TrainingConfig& config) {
  TrainingEnvironment env = data.environment();
  ExperimentResult out;
  PolicyParams init = initial_params(data.vocab(), config, data.embedder().dimension());
  out.initial = evaluate_policy(init, data.vocab(), data.holdout_split(), config, env);
  out.training = train(data.train_split(), config, env, &data.vocab());
  out.trained = evaluate_policy(out.training.params, data.vocab(), data.holdout_split(), config, env);
  return out;
}

std::vector<GeneratedReport> generate_reports(const ExperimentData& data, const PolicyParams& params,
                                              const TrainingConfig& config,
                                              std::span<const TrainingRecord> records) {
  TrainingEnvironment env = data.environment();
  std::vector<GeneratedReport> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    Embedding cond = record_condition(rec, config, env);
    Sample greedy = sample(params, cond.values(), {config.max_len, 0.0}, 0);
    out.push_back({rec.image.id, data.vocab().decode(std::span<const TokenId>(greedy.tokens).subspan(1)),
                   rec.reference});
  }
  return out;
}

std::string generated_to_jsonl(std::span<const GeneratedReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    nlohmann::ordered_json j = {{"id", r.id}, {"report", r.report}, {"reference", r.reference}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<std::pair<std::string, TrainingSwitches>> ablation_configurations() {
  return {
      {"Base", {false, false, false, false, false}},
      {"(a) MKE", {true, false, false, false, false}},
      {"(b) RL", {false, true, true, true, false}},
      {"(c) MKE+R_sen", {true, true, false, true, false}},
      {"(d) MKE+R_dis", {true, true, true, false, false}},
      {"full", {true, true, true, true, false}},
  };
}

AblationResult ablate(const ExperimentData& data, const TrainingConfig& config) {
  AblationResult result;
  TrainingEnvironment env = data.environment();
  for (const auto& [name, switches] : ablation_configurations()) {
    TrainingConfig c = config;
    c.switches = switches;
    c.switches.use_baseline = config.switches.use_baseline && switches.use_rl;
    try {
      TrainingResult trained = train(data.train_split(), c, env, &data.vocab());
      AblationRow row{name, c.switches, {}, trained.counters};
      row.evaluation = evaluate_policy(trained.params, data.vocab(), data.holdout_split(), c, env);
      result.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      result.error = name + ": " + e.what();
      break;
    }
  }
  return result;
}

std::string ablation_to_json(const AblationResult& result) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : result.rows) {
    const EvalReport& e = r.evaluation.report;
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["use_mke"] = r.switches.use_mke;
    row["use_rl"] = r.switches.use_rl;
    row["use_r_dis"] = r.switches.use_r_dis;
    row["use_r_sen"] = r.switches.use_r_sen;
    row["bleu_1"] = e.bleu_1;
    row["bleu_2"] = e.bleu_2;
    row["bleu_3"] = e.bleu_3;
    row["bleu_4"] = e.bleu_4;
    row["rouge_l"] = e.rouge_l;
    row["ce_precision"] = e.ce_precision;
    row["ce_recall"] = e.ce_recall;
    row["ce_f1"] = e.ce_f1;
    row["mean_reward"] = r.evaluation.mean_reward;
    row["counters"] = {{"mke", r.counters.mke},
                       {"sampling", r.counters.sampling},
                       {"disease_reward", r.counters.disease_reward},
                       {"sentence_reward", r.counters.sentence_reward},
                       {"rl_gradient", r.counters.rl_gradient},
                       {"ce_gradient", r.counters.ce_gradient}};
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["rows"] = std::move(rows);
  j["complete"] = !result.error.has_value();
  if (result.error) j["error"] = *result.error;
  return j.dump(2) + "\n";
}

std::string ablation_to_table(const AblationResult& result) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %4s %3s %5s %5s %7s %7s %7s %7s %7s %7s %7s %7s %7s\n", "config", "MKE",
                "RL", "R_dis", "R_sen", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "CE-P", "CE-R", "CE-F1",
                "reward");
  out << buf;
  auto mark = [](bool b) { return b ? "x" : "-"; };
  for (const auto& r : result.rows) {
    const EvalReport& e = r.evaluation.report;
    std::snprintf(buf, sizeof buf,
                  "%-14s %4s %3s %5s %5s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n", r.name.c_str(),
                  mark(r.switches.use_mke), mark(r.switches.use_rl), mark(r.switches.use_rl && r.switches.use_r_dis),
                  mark(r.switches.use_rl && r.switches.use_r_sen), e.bleu_1, e.bleu_2, e.bleu_3, e.bleu_4,
                  e.rouge_l, e.ce_precision, e.ce_recall, e.ce_f1, r.evaluation.mean_reward);
    out << buf;
  }
  if (result.error) out << "aborted: " << *result.error << "\n";
  return out.str();
}

std::vector<double> default_alpha_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }

std::vector<SweepRow> sweep_alpha(const ExperimentData& data, const TrainingConfig& config,
                                  std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kInvalidArgument, "alpha grid is empty");
  for (double a : values)
    if (!(a >= 0.0 && a <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha values must lie in [0,1]");
  TrainingEnvironment env = data.environment();
  std::vector<SweepRow> rows;
  for (double a : values) {
    TrainingConfig c = config;
    c.alpha = a;
    TrainingResult trained = train(data.train_split(), c, env, &data.vocab());
    PolicyEvaluation eval = evaluate_policy(trained.params, data.vocab(), data.holdout_split(), c, env);
    SweepRow row{a, eval.report.ce_f1, eval.report.bleu_4, eval.mean_reward, true};
    for (const auto& l : trained.log) row.constant_token_reward &= l.r_t_min == l.r_t_max;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_json(std::span<const SweepRow> rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["alpha"] = r.alpha;
    j["ce_f1"] = r.ce_f1;
    j["bleu_4"] = r.bleu_4;
    j["mean_reward"] = r.mean_reward;
    j["constant_token_reward"] = r.constant_token_reward;
    arr.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"rows", std::move(arr)}}.dump(2) + "\n";
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "alpha,ce_f1,bleu_4,mean_reward,constant_token_reward\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n", r.alpha, r.ce_f1, r.bleu_4, r.mean_reward,
                  r.constant_token_reward ? 1 : 0);
    out << buf;
  }
  return out.str();
}

}  // namespace kerm
