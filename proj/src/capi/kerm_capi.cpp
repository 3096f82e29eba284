#include "kerm/kerm.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerm/corpus.hpp"
#include "kerm/dataset.hpp"
#include "kerm/embedding.hpp"
#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/labeler.hpp"
#include "kerm/metrics.hpp"
#include "kerm/pipeline.hpp"
#include "kerm/policy.hpp"
#include "kerm/retrieval.hpp"
#include "kerm/rewards.hpp"
#include "kerm/text.hpp"
#include "kerm/trainer.hpp"

struct kerm_corpus {
  kerm::KnowledgeCorpus value;
};
struct kerm_embedder {
  std::unique_ptr<kerm::Embedder> value;
};
struct kerm_index {
  kerm::RetrievalIndex value;
};
struct kerm_lexicon {
  kerm::LabelLexicon value;
};
struct kerm_judge {
  std::unique_ptr<kerm::SentenceJudge> value;
};
struct kerm_experiment {
  kerm::ExperimentConfig value;
  std::filesystem::path base_dir;
};

namespace {

thread_local std::string g_last_error;

kerm_status to_status(kerm::ErrorCode code) {
  switch (code) {
    case kerm::ErrorCode::kInvalidArgument: return KERM_ERR_INVALID_ARGUMENT;
    case kerm::ErrorCode::kIo: return KERM_ERR_IO;
    case kerm::ErrorCode::kParse: return KERM_ERR_PARSE;
    case kerm::ErrorCode::kDimensionMismatch: return KERM_ERR_DIMENSION;
    case kerm::ErrorCode::kNumeric: return KERM_ERR_NUMERIC;
    case kerm::ErrorCode::kRemote: return KERM_ERR_REMOTE;
    case kerm::ErrorCode::kRuntime: return KERM_ERR_RUNTIME;
  }
  return KERM_ERR_RUNTIME;
}

template <typename F>
kerm_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return KERM_OK;
  } catch (const kerm::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return KERM_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KERM_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KERM_ERR_RUNTIME;
  }
}

void require(bool ok, const char* what) {
  if (!ok) kerm::fail(kerm::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

std::string str_or_empty(const char* s) { return s ? std::string(s) : std::string(); }

kerm_scored_fact to_c(const kerm::ScoredFact& f) {
  return {f.fact_id, f.score, f.retrieval_score.value_or(0.0), f.retrieval_score ? 1 : 0};
}

kerm::ScoredFact from_c(const kerm_scored_fact& f) {
  kerm::ScoredFact out{f.fact_id, f.score, std::nullopt};
  if (f.has_retrieval_score) out.retrieval_score = f.retrieval_score;
  return out;
}

void write_facts(const std::vector<kerm::ScoredFact>& facts, kerm_scored_fact* out, size_t capacity, size_t* count) {
  require(count != nullptr, "count must not be null");
  require(out != nullptr || facts.empty(), "output buffer must not be null");
  if (facts.size() > capacity) kerm::fail(kerm::ErrorCode::kInvalidArgument, "output buffer too small");
  for (size_t i = 0; i < facts.size(); ++i) out[i] = to_c(facts[i]);
  *count = facts.size();
}

kerm::BlendOptions blend_from(const kerm_reward_options& o) {
  return {o.alpha, o.use_r_dis != 0, o.use_r_sen != 0,
          o.report_mean ? kerm::SentenceMode::kReportMean : kerm::SentenceMode::kPerSentence};
}

kerm::UncertaintyPolicy policy_from(int uncertain_negative) {
  return uncertain_negative ? kerm::UncertaintyPolicy::kUncertainNegative : kerm::UncertaintyPolicy::kUncertainPositive;
}

void copy_embedding(const kerm::Embedding& e, double* out, size_t capacity) {
  require(out != nullptr, "output buffer must not be null");
  if (capacity < e.dimension()) kerm::fail(kerm::ErrorCode::kDimensionMismatch, "output buffer smaller than dimension");
  std::memcpy(out, e.values().data(), e.dimension() * sizeof(double));
}

nlohmann::ordered_json evaluation_json(const kerm::PolicyEvaluation& e) {
  nlohmann::ordered_json j;
  j["mean_reward"] = e.mean_reward;
  j["mean_r_dis"] = e.mean_r_dis;
  j["mean_r_sen"] = e.mean_r_sen;
  j["metrics"] = nlohmann::ordered_json::parse(kerm::eval_report_to_json(e.report));
  return j;
}

}  // namespace

extern "C" {

const char* kerm_version(void) { return "0.1.0"; }

const char* kerm_last_error(void) { return g_last_error.c_str(); }

const char* kerm_status_name(kerm_status status) {
  switch (status) {
    case KERM_OK: return "ok";
    case KERM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case KERM_ERR_IO: return "i/o error";
    case KERM_ERR_PARSE: return "parse error";
    case KERM_ERR_DIMENSION: return "dimension mismatch";
    case KERM_ERR_NUMERIC: return "numeric error";
    case KERM_ERR_REMOTE: return "remote error";
    case KERM_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

void kerm_string_free(char* s) { std::free(s); }

uint64_t kerm_derive_seed(uint64_t seed, const char* stage) { return kerm::derive_seed(seed, stage ? stage : ""); }

kerm_status kerm_corpus_build(const char* const* documents, size_t count, kerm_corpus** out) {
  return guard([&] {
    require(out != nullptr, "out must not be null");
    require(documents != nullptr || count == 0, "documents must not be null");
    std::vector<std::string> docs;
    docs.reserve(count);
    for (size_t i = 0; i < count; ++i) docs.push_back(str_or_empty(documents[i]));
    *out = new kerm_corpus{kerm::build_corpus(docs)};
  });
}

kerm_status kerm_corpus_load(const char* path, kerm_corpus** out) {
  return guard([&] {
    require(path && out, "path and out must not be null");
    *out = new kerm_corpus{kerm::load_corpus(path)};
  });
}

kerm_status kerm_corpus_save(const kerm_corpus* corpus, const char* path) {
  return guard([&] {
    require(corpus && path, "corpus and path must not be null");
    kerm::save_corpus(corpus->value, path);
  });
}

size_t kerm_corpus_size(const kerm_corpus* corpus) { return corpus ? corpus->value.size() : 0; }

kerm_status kerm_corpus_fact_text(const kerm_corpus* corpus, size_t id, char** out) {
  return guard([&] {
    require(corpus && out, "corpus and out must not be null");
    require(id < corpus->value.size(), "fact id out of range");
    put_string(out, corpus->value.at(id).text);
  });
}

kerm_status kerm_corpus_fingerprint(const kerm_corpus* corpus, char** out) {
  return guard([&] {
    require(corpus && out, "corpus and out must not be null");
    put_string(out, corpus->value.fingerprint());
  });
}

void kerm_corpus_free(kerm_corpus* corpus) { delete corpus; }

kerm_status kerm_embedder_hashing(size_t dimension, double sigma, uint64_t seed, kerm_embedder** out) {
  return guard([&] {
    require(out != nullptr, "out must not be null");
    require(dimension > 0, "dimension must be positive");
    require(sigma >= 0.0, "sigma must be non-negative");
    *out = new kerm_embedder{std::make_unique<kerm::HashingEmbedder>(dimension, kerm::ImageSynthesis{sigma, seed})};
  });
}

kerm_status kerm_embedder_callback(size_t dimension, kerm_embed_fn fn, void* user, const char* name, double sigma,
                                   uint64_t seed, kerm_embedder** out) {
  return guard([&] {
    require(out && fn, "out and fn must not be null");
    require(dimension > 0, "dimension must be positive");
    auto call = [fn, user, dimension](std::string_view text) {
      std::string owned(text);
      std::vector<double> v(dimension, 0.0);
      if (fn(user, owned.c_str(), v.data(), dimension) != 0)
        kerm::fail(kerm::ErrorCode::kRuntime, "embedding callback failed");
      return v;
    };
    *out = new kerm_embedder{std::make_unique<kerm::CallbackEmbedder>(
        dimension, call, name ? name : "callback", kerm::ImageSynthesis{sigma, seed})};
  });
}

kerm_status kerm_embedder_replay(const char* path, double sigma, uint64_t seed, kerm_embedder** out) {
  return guard([&] {
    require(path && out, "path and out must not be null");
    *out = new kerm_embedder{
        std::make_unique<kerm::ReplayEmbedder>(kerm::ReplayEmbedder::load(path, kerm::ImageSynthesis{sigma, seed}))};
  });
}

kerm_status kerm_embedder_record(const kerm_embedder* source, const char* const* texts, size_t count, char** out) {
  return guard([&] {
    require(source && out, "source and out must not be null");
    std::vector<std::string> v;
    for (size_t i = 0; i < count; ++i) v.push_back(str_or_empty(texts[i]));
    put_string(out, kerm::ReplayEmbedder::record(*source->value, v));
  });
}

size_t kerm_embedder_dimension(const kerm_embedder* embedder) {
  return embedder ? embedder->value->dimension() : 0;
}

kerm_status kerm_embed_text(const kerm_embedder* embedder, const char* text, double* out, size_t capacity) {
  return guard([&] {
    require(embedder && text, "embedder and text must not be null");
    copy_embedding(embedder->value->embed_text(text), out, capacity);
  });
}

kerm_status kerm_embed_image(const kerm_embedder* embedder, const char* id, const double* features,
                             size_t feature_count, const char* report, double* out, size_t capacity) {
  return guard([&] {
    require(embedder != nullptr, "embedder must not be null");
    kerm::ImageRecord rec;
    rec.id = str_or_empty(id);
    if (features) rec.feature_vector = std::vector<double>(features, features + feature_count);
    if (report) rec.paired_report = report;
    copy_embedding(embedder->value->embed_image(rec), out, capacity);
  });
}

void kerm_embedder_free(kerm_embedder* embedder) { delete embedder; }

kerm_status kerm_index_build(const kerm_corpus* corpus, const kerm_embedder* embedder, kerm_index** out) {
  return guard([&] {
    require(corpus && embedder && out, "corpus, embedder and out must not be null");
    *out = new kerm_index{kerm::RetrievalIndex::build(corpus->value, *embedder->value)};
  });
}

kerm_status kerm_index_load(const char* path, kerm_index** out) {
  return guard([&] {
    require(path && out, "path and out must not be null");
    *out = new kerm_index{kerm::RetrievalIndex::load(path)};
  });
}

kerm_status kerm_index_save(const kerm_index* index, const char* path) {
  return guard([&] {
    require(index && path, "index and path must not be null");
    index->value.save(path);
  });
}

size_t kerm_index_size(const kerm_index* index) { return index ? index->value.size() : 0; }
size_t kerm_index_dimension(const kerm_index* index) { return index ? index->value.dimension() : 0; }

kerm_status kerm_index_fingerprint(const kerm_index* index, char** out) {
  return guard([&] {
    require(index && out, "index and out must not be null");
    put_string(out, index->value.corpus_fingerprint());
  });
}

kerm_status kerm_index_embedder_name(const kerm_index* index, char** out) {
  return guard([&] {
    require(index && out, "index and out must not be null");
    put_string(out, index->value.embedder_name());
  });
}

void kerm_index_free(kerm_index* index) { delete index; }

kerm_status kerm_retrieve(const kerm_index* index, const double* query, size_t dimension, size_t k,
                          kerm_scored_fact* out, size_t capacity, size_t* count) {
  return guard([&] {
    require(index && query, "index and query must not be null");
    auto facts = kerm::retrieve(index->value, std::span<const double>(query, dimension), k);
    write_facts(facts, out, capacity, count);
  });
}

kerm_status kerm_purify(const kerm_scored_fact* candidates, size_t candidate_count, const char* indication,
                        const char* history, const kerm_corpus* corpus, const kerm_embedder* embedder, size_t m,
                        kerm_scored_fact* out, size_t capacity, size_t* count, int* context_free) {
  return guard([&] {
    require(candidates && corpus && embedder, "candidates, corpus and embedder must not be null");
    std::vector<kerm::ScoredFact> cands;
    for (size_t i = 0; i < candidate_count; ++i) cands.push_back(from_c(candidates[i]));
    kerm::ClinicalContext ctx{str_or_empty(indication), str_or_empty(history)};
    auto result = kerm::purify(cands, ctx, corpus->value, *embedder->value, m);
    write_facts(result.facts, out, capacity, count);
    if (context_free) *context_free = result.context_free ? 1 : 0;
  });
}

kerm_status kerm_scored_facts_jsonl(const kerm_scored_fact* facts, size_t count, const kerm_corpus* corpus,
                                    char** out) {
  return guard([&] {
    require(out && (facts || count == 0), "facts and out must not be null");
    std::vector<kerm::ScoredFact> v;
    for (size_t i = 0; i < count; ++i) v.push_back(from_c(facts[i]));
    put_string(out, kerm::scored_facts_to_jsonl(v, corpus ? &corpus->value : nullptr));
  });
}

kerm_status kerm_scored_facts_parse(const char* jsonl, kerm_scored_fact* out, size_t capacity, size_t* count) {
  return guard([&] {
    require(jsonl != nullptr, "jsonl must not be null");
    write_facts(kerm::scored_facts_from_jsonl(jsonl), out, capacity, count);
  });
}

kerm_status kerm_lexicon_default(kerm_lexicon** out) {
  return guard([&] {
    require(out != nullptr, "out must not be null");
    *out = new kerm_lexicon{kerm::default_lexicon()};
  });
}

kerm_status kerm_lexicon_load(const char* path, kerm_lexicon** out) {
  return guard([&] {
    require(path && out, "path and out must not be null");
    *out = new kerm_lexicon{kerm::load_lexicon(path)};
  });
}

kerm_status kerm_lexicon_serialize(const kerm_lexicon* lexicon, char** out) {
  return guard([&] {
    require(lexicon && out, "lexicon and out must not be null");
    put_string(out, kerm::serialize_lexicon(lexicon->value));
  });
}

void kerm_lexicon_free(kerm_lexicon* lexicon) { delete lexicon; }

const char* kerm_category_name(size_t index) {
  if (index >= kerm::kCategoryCount) return nullptr;
  return kerm::category_name(kerm::category_at(index)).data();
}

kerm_status kerm_label_report(const kerm_lexicon* lexicon, const char* report, int slots[KERM_CATEGORY_COUNT]) {
  return guard([&] {
    require(lexicon && report && slots, "lexicon, report and slots must not be null");
    auto labels = kerm::label_report(report, lexicon->value);
    for (size_t i = 0; i < kerm::kCategoryCount; ++i) slots[i] = static_cast<int>(labels.slots[i]);
  });
}

kerm_status kerm_label_report_json(const kerm_lexicon* lexicon, const char* report, char** out) {
  return guard([&] {
    require(lexicon && report && out, "lexicon, report and out must not be null");
    put_string(out, kerm::labels_to_json(kerm::label_report(report, lexicon->value)));
  });
}

kerm_status kerm_judge_create(const kerm_judge_config* config, kerm_judge** out) {
  return guard([&] {
    require(out != nullptr, "out must not be null");
    kerm::JudgeConfig c;
    if (config) {
      c.mode = config->remote ? kerm::JudgeMode::kRemote : kerm::JudgeMode::kOffline;
      c.endpoint = str_or_empty(config->endpoint);
      if (config->timeout_seconds > 0) c.timeout_seconds = config->timeout_seconds;
      if (config->retries >= 0) c.retries = config->retries;
      c.prompt_template = str_or_empty(config->prompt_template);
    }
    *out = new kerm_judge{kerm::make_judge(c)};
  });
}

void kerm_judge_free(kerm_judge* judge) { delete judge; }

kerm_reward_options kerm_reward_options_default(void) { return {0.4, 1, 1, 0, 0, 0}; }

kerm_status kerm_disease_reward(const kerm_lexicon* lexicon, const char* generated, const char* reference,
                                const kerm_reward_options* options, double* out) {
  return guard([&] {
    require(lexicon && generated && reference && out, "arguments must not be null");
    kerm_reward_options o = options ? *options : kerm_reward_options_default();
    *out = kerm::disease_reward(generated, reference, lexicon->value, policy_from(o.uncertain_negative),
                                o.macro ? kerm::F1Averaging::kMacro : kerm::F1Averaging::kMicro);
  });
}

kerm_status kerm_reward_trace(const kerm_lexicon* lexicon, const kerm_judge* judge, const char* generated,
                              const char* reference, const kerm_reward_options* options, char** out) {
  return guard([&] {
    require(lexicon && judge && generated && reference && out, "arguments must not be null");
    kerm_reward_options o = options ? *options : kerm_reward_options_default();
    auto trace = kerm::score_report(generated, reference, lexicon->value, *judge->value, blend_from(o),
                                    policy_from(o.uncertain_negative),
                                    o.macro ? kerm::F1Averaging::kMacro : kerm::F1Averaging::kMicro);
    put_string(out, kerm::trace_to_json(trace));
  });
}

kerm_status kerm_evaluate(const char* const* candidates, const char* const* references, size_t count,
                          const kerm_lexicon* lexicon, int uncertain_negative, int per_example, char** out) {
  return guard([&] {
    require(lexicon && out, "lexicon and out must not be null");
    require((candidates && references) || count == 0, "inputs must not be null");
    std::vector<std::string> c, r;
    for (size_t i = 0; i < count; ++i) {
      c.push_back(str_or_empty(candidates[i]));
      r.push_back(str_or_empty(references[i]));
    }
    auto report = kerm::evaluate_reports(c, r, lexicon->value, policy_from(uncertain_negative), per_example != 0);
    put_string(out, kerm::eval_report_to_json(report, per_example != 0));
  });
}

kerm_status kerm_synth_dataset(size_t n, uint64_t seed, const kerm_lexicon* lexicon, const kerm_embedder* embedder,
                               const char* path) {
  return guard([&] {
    require(lexicon && embedder && path, "lexicon, embedder and path must not be null");
    kerm::SyntheticOptions opts;
    opts.n = n;
    opts.seed = seed;
    auto records = kerm::make_synthetic_dataset(opts, lexicon->value, *embedder->value);
    kerm::save_dataset(records, path);
  });
}

kerm_status kerm_experiment_create(const char* text, const char* base_dir, kerm_experiment** out) {
  return guard([&] {
    require(out != nullptr, "out must not be null");
    std::filesystem::path base = str_or_empty(base_dir);
    *out = new kerm_experiment{kerm::parse_experiment_config(text ? text : "", base), base};
  });
}

kerm_status kerm_experiment_load(const char* path, kerm_experiment** out) {
  return guard([&] {
    require(path && out, "path and out must not be null");
    std::filesystem::path p(path);
    *out = new kerm_experiment{kerm::load_experiment_config(p), p.parent_path()};
  });
}

kerm_status kerm_experiment_set(kerm_experiment* experiment, const char* key, const char* value) {
  return guard([&] {
    require(experiment && key && value, "arguments must not be null");
    kerm::ExperimentConfig updated = experiment->value;
    kerm::set_config_value(updated, key, value);
    updated.validate();
    experiment->value = std::move(updated);
  });
}

kerm_status kerm_experiment_json(const kerm_experiment* experiment, char** out) {
  return guard([&] {
    require(experiment && out, "experiment and out must not be null");
    put_string(out, kerm::experiment_config_to_json(experiment->value));
  });
}

void kerm_experiment_free(kerm_experiment* experiment) { delete experiment; }

kerm_status kerm_train(const kerm_experiment* experiment, const char* checkpoint_path, const char* log_path,
                       char** summary) {
  return guard([&] {
    require(experiment != nullptr, "experiment must not be null");
    if (checkpoint_path) kerm::check_output_path(checkpoint_path);
    if (log_path) kerm::check_output_path(log_path);
    const auto& config = experiment->value;
    kerm::ExperimentData data(config);
    auto result = kerm::run_experiment(data, config.training);
    if (checkpoint_path)
      kerm::save_checkpoint({result.training.params, result.training.vocab, config.training.seed}, checkpoint_path);
    if (log_path) kerm::io::write_file_atomic(log_path, kerm::training_log_to_jsonl(result.training.log));
    if (summary) {
      nlohmann::ordered_json j;
      j["steps"] = result.training.log.size();
      j["train_records"] = data.train_split().size();
      j["holdout_records"] = data.holdout_split().size();
      j["vocabulary"] = data.vocab().size();
      j["initial"] = evaluation_json(result.initial);
      j["trained"] = evaluation_json(result.trained);
      *summary = dup_string(j.dump(2) + "\n");
    }
  });
}

kerm_status kerm_generate(const kerm_experiment* experiment, const char* checkpoint_path, const char* dataset_path,
                          char** out) {
  return guard([&] {
    require(experiment && checkpoint_path && out, "experiment, checkpoint and out must not be null");
    kerm::ExperimentData data(experiment->value);
    auto ckpt = kerm::load_checkpoint(checkpoint_path, &data.vocab());
    if (ckpt.params.shape().cond != data.embedder().dimension())
      kerm::fail(kerm::ErrorCode::kDimensionMismatch, "checkpoint conditioning width does not match the embedder");
    std::vector<kerm::TrainingRecord> records;
    if (dataset_path) records = kerm::load_dataset(dataset_path);
    auto span = dataset_path ? std::span<const kerm::TrainingRecord>(records) : data.holdout_split();
    put_string(out, kerm::generated_to_jsonl(kerm::generate_reports(data, ckpt.params, experiment->value.training, span)));
  });
}

kerm_status kerm_ablate(const kerm_experiment* experiment, char** json, char** table) {
  kerm::AblationResult result;
  kerm_status st = guard([&] {
    require(experiment != nullptr, "experiment must not be null");
    kerm::ExperimentData data(experiment->value);
    result = kerm::ablate(data, experiment->value.training);
  });
  if (st != KERM_OK) return st;
  st = guard([&] {
    put_string(json, kerm::ablation_to_json(result));
    put_string(table, kerm::ablation_to_table(result));
  });
  if (st == KERM_OK && result.error) {
    g_last_error = *result.error;
    return KERM_ERR_RUNTIME;
  }
  return st;
}

kerm_status kerm_sweep_alpha(const kerm_experiment* experiment, const double* values, size_t count, char** json,
                             char** csv) {
  return guard([&] {
    require(experiment != nullptr, "experiment must not be null");
    std::vector<double> grid = values ? std::vector<double>(values, values + count) : kerm::default_alpha_grid();
    kerm::ExperimentData data(experiment->value);
    auto rows = kerm::sweep_alpha(data, experiment->value.training, grid);
    put_string(json, kerm::sweep_to_json(rows));
    put_string(csv, kerm::sweep_to_csv(rows));
  });
}

}  // extern "C"
