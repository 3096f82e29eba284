#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kerm/embedding.hpp"
#include "kerm/labeler.hpp"
#include "kerm/retrieval.hpp"

namespace kerm {

struct TrainingRecord {
  ImageRecord image;
  ClinicalContext context;
  std::string reference;
  std::optional<DiseaseLabels> labels;  // generating labels, synthetic data only
};

struct SyntheticOptions {
  std::size_t n = 0;
  std::uint64_t seed = 1;
  // Probability that each category is rendered as a positive finding. Index 0
  // (No Finding) is ignored; it is derived.
  std::array<double, kCategoryCount> positive_rate = {0.0,  0.05, 0.20, 0.18, 0.08, 0.12, 0.10,
                                                      0.08, 0.15, 0.05, 0.20, 0.03, 0.04, 0.15};
  double uncertain_rate = 0.03;
  double negative_rate = 0.20;
};

// Samples a label assignment per record, renders a lexicon-consistent report,
// synthesizes the image feature vector from the report through the
// embedder's image synthesis, and writes an indication naming one of the
// mentioned categories. Deterministic in options.seed and the embedder.
std::vector<TrainingRecord> make_synthetic_dataset(const SyntheticOptions& options,
                                                   const LabelLexicon& lexicon,
                                                   const Embedder& embedder);

// JSON Lines {"id","features","indication","history","report","labels"?}.
std::string serialize_dataset(std::span<const TrainingRecord> records);
std::vector<TrainingRecord> parse_dataset(std::string_view text);
void save_dataset(std::span<const TrainingRecord> records, const std::filesystem::path& path);
std::vector<TrainingRecord> load_dataset(const std::filesystem::path& path);

}  // namespace kerm
