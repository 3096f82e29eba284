#include "kerm/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

constexpr const char* kIndexFormat = "kerm-index";
constexpr int kIndexVersion = 1;

}  // namespace

bool ranks_before(const ScoredFact& a, const ScoredFact& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.fact_id < b.fact_id;
}

void rank_facts(std::vector<ScoredFact>& facts) {
  std::stable_sort(facts.begin(), facts.end(),
                   [](const ScoredFact& a, const ScoredFact& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < facts.size();) {
    std::size_t j = i + 1;
    while (j < facts.size() && facts[j - 1].score - facts[j].score <= kScoreTieTolerance) ++j;
    if (j - i > 1)
      std::sort(facts.begin() + static_cast<std::ptrdiff_t>(i), facts.begin() + static_cast<std::ptrdiff_t>(j),
                [](const ScoredFact& a, const ScoredFact& b) { return a.fact_id < b.fact_id; });
    i = j;
  }
}

RetrievalIndex RetrievalIndex::build(const KnowledgeCorpus& corpus, const Embedder& embedder) {
  if (corpus.empty()) fail(ErrorCode::kInvalidArgument, "cannot index an empty corpus");
  RetrievalIndex index;
  index.fingerprint_ = corpus.fingerprint();
  index.embedder_name_ = embedder.name();
  index.rows_ = corpus.size();
  index.dimension_ = embedder.dimension();
  index.keys_.reserve(index.rows_ * index.dimension_);
  for (const Fact& f : corpus.facts()) {
    Embedding e = embedder.embed_text(f.text);
    index.keys_.insert(index.keys_.end(), e.values().begin(), e.values().end());
  }
  return index;
}

std::span<const double> RetrievalIndex::row(std::size_t id) const {
  if (id >= rows_) fail(ErrorCode::kInvalidArgument, "index row out of range");
  return std::span<const double>(keys_).subspan(id * dimension_, dimension_);
}

std::string RetrievalIndex::serialize() const {
  std::string out;
  nlohmann::ordered_json header = {{"format", kIndexFormat},  {"version", kIndexVersion},
                                   {"fingerprint", fingerprint_}, {"embedder", embedder_name_},
                                   {"dimension", dimension_},     {"count", rows_}};
  out += header.dump() + "\n";
  for (std::size_t i = 0; i < rows_; ++i) {
    auto r = row(i);
    nlohmann::ordered_json line = {{"id", i}, {"key", std::vector<double>(r.begin(), r.end())}};
    out += line.dump() + "\n";
  }
  return out;
}

RetrievalIndex RetrievalIndex::parse(std::string_view text) {
  auto lines = io::split_lines(text);
  auto error = [](std::size_t line, const std::string& what) {
    fail(ErrorCode::kParse, "index line " + std::to_string(line) + ": " + what);
  };
  if (lines.empty()) error(1, "missing header");
  RetrievalIndex index;
  try {
    auto header = nlohmann::json::parse(lines[0]);
    if (header.value("format", "") != kIndexFormat) error(1, "not an index header");
    if (header.value("version", 0) != kIndexVersion) error(1, "unsupported version");
    index.fingerprint_ = header.at("fingerprint").get<std::string>();
    index.embedder_name_ = header.value("embedder", "");
    index.dimension_ = header.at("dimension").get<std::size_t>();
    index.rows_ = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    error(1, e.what());
  }
  index.keys_.reserve(index.rows_ * index.dimension_);
  std::size_t seen = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      if (j.at("id").get<std::size_t>() != seen) error(i + 1, "non-contiguous id");
      auto key = j.at("key").get<std::vector<double>>();
      if (key.size() != index.dimension_) error(i + 1, "key dimension mismatch");
      index.keys_.insert(index.keys_.end(), key.begin(), key.end());
      ++seen;
    } catch (const nlohmann::json::exception& e) {
      error(i + 1, e.what());
    }
  }
  if (seen != index.rows_) error(1, "count does not match number of rows");
  return index;
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, serialize());
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
  return parse(io::read_file(path));
}

std::vector<ScoredFact> retrieve(const RetrievalIndex& index, std::span<const double> query,
                                 std::size_t k) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "k must be positive");
  if (index.size() == 0) fail(ErrorCode::kInvalidArgument, "index is empty");
  if (query.size() != index.dimension())
    fail(ErrorCode::kDimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                            " does not match index dimension " +
                                            std::to_string(index.dimension()));
  Embedding q = Embedding::normalized(std::vector<double>(query.begin(), query.end()));

  std::vector<ScoredFact> scored(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) scored[i] = {i, dot(q.values(), index.row(i)), {}};
  std::size_t keep = std::min(k, scored.size());
  // Only facts near the k-th score can reach the top k; rank just those.
  auto by_score = [](const ScoredFact& a, const ScoredFact& b) { return a.score > b.score; };
  std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep - 1), scored.end(), by_score);
  double cut = scored[keep - 1].score - 1e3 * kScoreTieTolerance;
  std::erase_if(scored, [cut](const ScoredFact& f) { return f.score < cut; });
  rank_facts(scored);
  scored.resize(keep);
  return scored;
}

bool ClinicalContext::empty() const { return text().empty(); }

std::string ClinicalContext::text() const {
  return collapse_whitespace(indication + " " + history);
}

PurifyResult purify(std::span<const ScoredFact> candidates, const ClinicalContext& context,
                    const KnowledgeCorpus& corpus, const Embedder& embedder, std::size_t m) {
  if (m == 0) fail(ErrorCode::kInvalidArgument, "m must be positive");
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "no candidates to purify");

  PurifyResult result;
  std::size_t keep = std::min(m, candidates.size());
  if (context.empty()) {
    result.context_free = true;
    for (std::size_t i = 0; i < keep; ++i) {
      ScoredFact f = candidates[i];
      f.retrieval_score = candidates[i].score;
      result.facts.push_back(f);
    }
    return result;
  }

  Embedding context_embedding = embedder.embed_text(context.text());
  std::vector<ScoredFact> rescored;
  rescored.reserve(candidates.size());
  for (const ScoredFact& c : candidates) {
    Embedding fact = embedder.embed_text(corpus.at(c.fact_id).text);
    rescored.push_back({c.fact_id, dot(fact.values(), context_embedding.values()), c.score});
  }
  rank_facts(rescored);
  rescored.resize(keep);
  result.facts = std::move(rescored);
  return result;
}

MkeResult mke_detailed(const ImageRecord& image, const ClinicalContext& context,
                       const RetrievalIndex& index, const KnowledgeCorpus& corpus,
                       const Embedder& embedder, RetrievalSettings settings) {
  if (index.corpus_fingerprint() != corpus.fingerprint() || index.size() != corpus.size())
    fail(ErrorCode::kInvalidArgument, "index was not built for this corpus");
  MkeResult r;
  Embedding query = embedder.embed_image(image);
  r.retrieved = retrieve(index, query.values(), settings.k);
  r.purified = purify(r.retrieved, context, corpus, embedder, settings.m);
  for (const ScoredFact& f : r.purified.facts) r.facts.push_back(corpus.at(f.fact_id));
  return r;
}

std::vector<Fact> mke(const ImageRecord& image, const ClinicalContext& context,
                      const RetrievalIndex& index, const KnowledgeCorpus& corpus,
                      const Embedder& embedder, RetrievalSettings settings) {
  return mke_detailed(image, context, index, corpus, embedder, settings).facts;
}

std::string scored_facts_to_jsonl(std::span<const ScoredFact> facts, const KnowledgeCorpus* corpus) {
  std::string out;
  for (const ScoredFact& f : facts) {
    nlohmann::ordered_json j = {{"fact_id", f.fact_id}, {"score", f.score}};
    if (f.retrieval_score) j["retrieval_score"] = *f.retrieval_score;
    if (corpus) j["text"] = corpus->at(f.fact_id).text;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ScoredFact> scored_facts_from_jsonl(std::string_view text) {
  std::vector<ScoredFact> out;
  std::size_t line_no = 0;
  for (const std::string& line : io::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ScoredFact f;
      f.fact_id = j.at("fact_id").get<std::size_t>();
      f.score = j.at("score").get<double>();
      if (j.contains("retrieval_score")) f.retrieval_score = j["retrieval_score"].get<double>();
      out.push_back(f);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "scored fact line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kerm
