#include "kerm/corpus.hpp"

#include <unordered_set>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

constexpr const char* kFormat = "kerm-corpus";
constexpr int kVersion = 1;

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  fail(ErrorCode::kParse, "corpus line " + std::to_string(line) + ": " + what);
}

}  // namespace

KnowledgeCorpus KnowledgeCorpus::from_facts(std::vector<Fact> facts) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (facts[i].id != i)
      fail(ErrorCode::kInvalidArgument,
           "fact ids must be contiguous from 0 (expected " + std::to_string(i) +
               ", got " + std::to_string(facts[i].id) + ")");
    std::string key = normalize_sentence(facts[i].text);
    if (key.empty()) fail(ErrorCode::kInvalidArgument, "fact " + std::to_string(i) + " has empty text");
    if (!seen.insert(std::move(key)).second)
      fail(ErrorCode::kInvalidArgument, "duplicate fact text at id " + std::to_string(i));
  }
  KnowledgeCorpus corpus;
  corpus.fingerprint_ = corpus_fingerprint(facts);
  corpus.facts_ = std::move(facts);
  return corpus;
}

const Fact& KnowledgeCorpus::at(std::size_t id) const {
  if (id >= facts_.size())
    fail(ErrorCode::kInvalidArgument, "fact id " + std::to_string(id) + " out of range");
  return facts_[id];
}

std::string corpus_fingerprint(std::span<const Fact> facts) {
  std::uint64_t h = fnv1a64("");
  for (const Fact& f : facts) {
    h = fnv1a64(normalize_sentence(f.text), h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

KnowledgeCorpus build_corpus(std::span<const std::string> documents,
                             std::span<const std::string> source_tags) {
  if (documents.empty()) fail(ErrorCode::kInvalidArgument, "empty corpus source");
  if (!source_tags.empty() && source_tags.size() != documents.size())
    fail(ErrorCode::kInvalidArgument, "source_tags must be parallel to documents");

  std::vector<Fact> facts;
  std::unordered_set<std::string> seen;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (const std::string& sentence : split_sentences(documents[d])) {
      if (!seen.insert(normalize_sentence(sentence)).second) continue;
      Fact f;
      f.id = facts.size();
      f.text = strip_terminal_punctuation(sentence);
      f.source_tag = source_tags.empty() ? "doc:" + std::to_string(d) : source_tags[d];
      facts.push_back(std::move(f));
    }
  }
  return KnowledgeCorpus::from_facts(std::move(facts));
}

std::string serialize_corpus(const KnowledgeCorpus& corpus) {
  std::string out;
  nlohmann::ordered_json header = {{"format", kFormat},
                                   {"version", kVersion},
                                   {"fingerprint", corpus.fingerprint()},
                                   {"count", corpus.size()}};
  out += header.dump() + "\n";
  for (const Fact& f : corpus.facts()) {
    nlohmann::ordered_json line = {{"id", f.id}, {"text", f.text}, {"source_tag", f.source_tag}};
    out += line.dump() + "\n";
  }
  return out;
}

KnowledgeCorpus parse_corpus(std::string_view text) {
  std::vector<std::string> lines = io::split_lines(text);
  if (lines.empty()) parse_error(1, "missing header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(lines[0]);
  } catch (const nlohmann::json::exception& e) {
    parse_error(1, e.what());
  }
  if (!header.is_object() || header.value("format", "") != kFormat)
    parse_error(1, "not a corpus header");
  if (header.value("version", 0) != kVersion) parse_error(1, "unsupported version");

  std::vector<Fact> facts;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      Fact f;
      f.id = j.at("id").get<std::size_t>();
      f.text = j.at("text").get<std::string>();
      f.source_tag = j.value("source_tag", "");
      if (f.id != facts.size()) parse_error(i + 1, "non-contiguous id " + std::to_string(f.id));
      facts.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      parse_error(i + 1, e.what());
    }
  }
  if (header.contains("count") && header["count"].get<std::size_t>() != facts.size())
    parse_error(1, "count does not match number of facts");

  KnowledgeCorpus corpus;
  try {
    corpus = KnowledgeCorpus::from_facts(std::move(facts));
  } catch (const Error& e) {
    fail(ErrorCode::kParse, std::string("corpus: ") + e.what());
  }
  if (header.value("fingerprint", "") != corpus.fingerprint())
    parse_error(1, "fingerprint mismatch");
  return corpus;
}

void save_corpus(const KnowledgeCorpus& corpus, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_corpus(corpus));
}

KnowledgeCorpus load_corpus(const std::filesystem::path& path) {
  return parse_corpus(io::read_file(path));
}

}  // namespace kerm
