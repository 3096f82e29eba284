#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kerm/corpus.hpp"
#include "kerm/embedding.hpp"

namespace kerm {

inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr std::size_t kDefaultPurifiedM = 5;

struct ScoredFact {
  std::size_t fact_id = 0;
  double score = 0.0;
  // Set by purify: the score the fact had in the retrieval stage.
  std::optional<double> retrieval_score;

  bool operator==(const ScoredFact&) const = default;
};

// Scores closer than this are treated as equal. Hashed embeddings have small
// integer entries, so exact cosine ties are common and rounding must not
// decide them.
inline constexpr double kScoreTieTolerance = 1e-12;

// Score descending, then fact id ascending. Exact comparison.
bool ranks_before(const ScoredFact& a, const ScoredFact& b);

// Sorts by score descending; runs of scores that differ by at most
// kScoreTieTolerance from their neighbour are ordered by fact id.
void rank_facts(std::vector<ScoredFact>& facts);

// Fact embeddings as unit-norm rows aligned with fact ids.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;

  static RetrievalIndex build(const KnowledgeCorpus& corpus, const Embedder& embedder);

  const std::string& corpus_fingerprint() const { return fingerprint_; }
  const std::string& embedder_name() const { return embedder_name_; }
  std::size_t size() const { return rows_; }
  std::size_t dimension() const { return dimension_; }
  std::span<const double> row(std::size_t id) const;
  std::span<const double> keys() const { return keys_; }

  std::string serialize() const;
  static RetrievalIndex parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static RetrievalIndex load(const std::filesystem::path& path);

  bool operator==(const RetrievalIndex&) const = default;

 private:
  std::string fingerprint_;
  std::string embedder_name_;
  std::size_t rows_ = 0;
  std::size_t dimension_ = 0;
  std::vector<double> keys_;
};

// Exact top-k by cosine similarity. The query is normalized first, so any
// positive rescaling yields the same ranking and scores.
std::vector<ScoredFact> retrieve(const RetrievalIndex& index, std::span<const double> query,
                                 std::size_t k = kDefaultTopK);

struct ClinicalContext {
  std::string indication;
  std::string history;

  bool empty() const;
  // Trimmed "indication history".
  std::string text() const;
};

struct PurifyResult {
  std::vector<ScoredFact> facts;
  // No indication or history: candidates passed through in input order.
  bool context_free = false;
};

// Re-ranks candidates by cosine similarity between each fact and the context
// embedding and keeps the top m. Output is always a subset of the input.
PurifyResult purify(std::span<const ScoredFact> candidates, const ClinicalContext& context,
                    const KnowledgeCorpus& corpus, const Embedder& embedder,
                    std::size_t m = kDefaultPurifiedM);

struct RetrievalSettings {
  std::size_t k = kDefaultTopK;
  std::size_t m = kDefaultPurifiedM;
};

struct MkeResult {
  std::vector<ScoredFact> retrieved;
  PurifyResult purified;
  std::vector<Fact> facts;
};

// Knowledge enhancement for one image: retrieve(k) then purify(m).
MkeResult mke_detailed(const ImageRecord& image, const ClinicalContext& context,
                       const RetrievalIndex& index, const KnowledgeCorpus& corpus,
                       const Embedder& embedder, RetrievalSettings settings = {});

std::vector<Fact> mke(const ImageRecord& image, const ClinicalContext& context,
                      const RetrievalIndex& index, const KnowledgeCorpus& corpus,
                      const Embedder& embedder, RetrievalSettings settings = {});

std::string scored_facts_to_jsonl(std::span<const ScoredFact> facts,
                                  const KnowledgeCorpus* corpus = nullptr);
std::vector<ScoredFact> scored_facts_from_jsonl(std::string_view text);

}  // namespace kerm
