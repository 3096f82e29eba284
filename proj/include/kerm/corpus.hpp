#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kerm {

struct Fact {
  std::size_t id = 0;
  std::string text;
  std::string source_tag;

  bool operator==(const Fact&) const = default;
};

// Ordered, deduplicated store of fact sentences. Immutable once built.
class KnowledgeCorpus {
 public:
  KnowledgeCorpus() = default;

  // Validates ids (contiguous from 0), non-empty texts and uniqueness of
  // normalized texts.
  static KnowledgeCorpus from_facts(std::vector<Fact> facts);

  const std::vector<Fact>& facts() const { return facts_; }
  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }
  const Fact& at(std::size_t id) const;

  // Hash over the normalized texts in id order.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::vector<Fact> facts_;
  std::string fingerprint_;
};

std::string corpus_fingerprint(std::span<const Fact> facts);

// One fact per distinct normalized sentence, in first-occurrence order.
// source_tags, when given, must be parallel to documents; otherwise facts are
// tagged "doc:<index>".
KnowledgeCorpus build_corpus(std::span<const std::string> documents,
                             std::span<const std::string> source_tags = {});

// JSON Lines: a header object then one {"id","text","source_tag"} per line.
std::string serialize_corpus(const KnowledgeCorpus& corpus);
KnowledgeCorpus parse_corpus(std::string_view text);

void save_corpus(const KnowledgeCorpus& corpus, const std::filesystem::path& path);
KnowledgeCorpus load_corpus(const std::filesystem::path& path);

}  // namespace kerm
