#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kerm/corpus.hpp"
#include "kerm/dataset.hpp"
#include "kerm/embedding.hpp"
#include "kerm/labeler.hpp"
#include "kerm/retrieval.hpp"
#include "kerm/rewards.hpp"
#include "kerm/trainer.hpp"

namespace kerm {

struct ExperimentConfig {
  TrainingConfig training;
  std::size_t dataset_size = 2000;
  double holdout_fraction = 0.1;
  std::size_t dimension = kDefaultDimension;
  double image_sigma = 0.1;
  JudgeConfig judge;
  // Inputs. Empty: use the built-in lexicon, synthesize the dataset, build
  // the corpus from the training references and index it.
  std::filesystem::path lexicon_path;
  std::filesystem::path dataset_path;
  std::filesystem::path corpus_path;
  std::filesystem::path index_path;

  void validate() const;
};

// JSON object or key=value lines ('#' starts a comment). Unknown keys are
// errors. Relative paths resolve against base_dir.
ExperimentConfig parse_experiment_config(std::string_view text,
                                         const std::filesystem::path& base_dir = {});
// Applies one key=value setting; value is parsed as JSON, else taken as text.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

// Fails before any work if an input path is missing.
void check_input_paths(const ExperimentConfig& config);
// Fails if the parent directory of an output path does not exist.
void check_output_path(const std::filesystem::path& path);

// Everything one experiment needs, loaded or synthesized once and shared by
// every run over the same seeds.
class ExperimentData {
 public:
  explicit ExperimentData(const ExperimentConfig& config);

  const LabelLexicon& lexicon() const { return lexicon_; }
  const HashingEmbedder& embedder() const { return *embedder_; }
  const SentenceJudge& judge() const { return *judge_; }
  const KnowledgeCorpus& corpus() const { return corpus_; }
  const RetrievalIndex& index() const { return index_; }
  std::span<const TrainingRecord> train_split() const { return train_; }
  std::span<const TrainingRecord> holdout_split() const { return holdout_; }
  const Vocabulary& vocab() const { return vocab_; }

  TrainingEnvironment environment() const;

 private:
  LabelLexicon lexicon_;
  std::unique_ptr<HashingEmbedder> embedder_;
  std::unique_ptr<SentenceJudge> judge_;
  KnowledgeCorpus corpus_;
  RetrievalIndex index_;
  std::vector<TrainingRecord> train_;
  std::vector<TrainingRecord> holdout_;
  Vocabulary vocab_;
};

struct ExperimentResult {
  TrainingResult training;
  PolicyEvaluation initial;  // the untrained parameters on the held-out split
  PolicyEvaluation trained;
};

ExperimentResult run_experiment(const ExperimentData& data, const TrainingConfig& config);

struct GeneratedReport {
  std::string id;
  std::string report;
  std::string reference;
};

// Greedy decoding with the same conditioning as training.
std::vector<GeneratedReport> generate_reports(const ExperimentData& data, const PolicyParams& params,
                                              const TrainingConfig& config,
                                              std::span<const TrainingRecord> records);
std::string generated_to_jsonl(std::span<const GeneratedReport> reports);

struct AblationRow {
  std::string name;
  TrainingSwitches switches;
  PolicyEvaluation evaluation;
  ComponentCounters counters;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::optional<std::string> error;  // set when a row failed; earlier rows are kept
};

// The six switch settings: Base, (a) MKE, (b) RL, (c) MKE+R_sen, (d) MKE+R_dis, full.
std::vector<std::pair<std::string, TrainingSwitches>> ablation_configurations();

AblationResult ablate(const ExperimentData& data, const TrainingConfig& config);
std::string ablation_to_json(const AblationResult& result);
std::string ablation_to_table(const AblationResult& result);

struct SweepRow {
  double alpha = 0.0;
  double ce_f1 = 0.0;
  double bleu_4 = 0.0;
  double mean_reward = 0.0;
  // Every logged step had min R_t == max R_t.
  bool constant_token_reward = false;
};

std::vector<double> default_alpha_grid();
std::vector<SweepRow> sweep_alpha(const ExperimentData& data, const TrainingConfig& config,
                                  std::span<const double> values);
std::string sweep_to_json(std::span<const SweepRow> rows);
std::string sweep_to_csv(std::span<const SweepRow> rows);

}  // namespace kerm
