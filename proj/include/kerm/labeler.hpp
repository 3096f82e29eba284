#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kerm {

enum class Category : int {
  kNoFinding = 0,
  kEnlargedCardiomediastinum,
  kCardiomegaly,
  kLungOpacity,
  kLungLesion,
  kEdema,
  kConsolidation,
  kPneumonia,
  kAtelectasis,
  kPneumothorax,
  kPleuralEffusion,
  kPleuralOther,
  kFracture,
  kSupportDevices,
};

inline constexpr std::size_t kCategoryCount = 14;

std::string_view category_name(Category c);
std::optional<Category> category_from_name(std::string_view name);
inline Category category_at(std::size_t i) { return static_cast<Category>(i); }

// Numeric order is mention precedence.
enum class Mention : int { kUnmentioned = 0, kNegative = 1, kUncertain = 2, kPositive = 3 };

std::string_view mention_name(Mention m);
std::optional<Mention> mention_from_name(std::string_view name);

struct DiseaseLabels {
  std::array<Mention, kCategoryCount> slots{};

  Mention& operator[](Category c) { return slots[static_cast<std::size_t>(c)]; }
  Mention operator[](Category c) const { return slots[static_cast<std::size_t>(c)]; }
  bool operator==(const DiseaseLabels&) const = default;
};

enum class UncertaintyPolicy { kUncertainPositive, kUncertainNegative };

std::string_view policy_name(UncertaintyPolicy p);
UncertaintyPolicy policy_from_name(std::string_view name);

// Positive class membership per category under the uncertainty policy.
std::array<bool, kCategoryCount> binarize(const DiseaseLabels& labels, UncertaintyPolicy policy);

// Phrase and cue lists driving label_report. "No Finding" is derived and never
// listed; every other category needs at least one phrase.
class LabelLexicon {
 public:
  struct Entry {
    Category category;
    std::vector<std::string> phrases;
  };

  LabelLexicon() = default;
  LabelLexicon(std::vector<Entry> entries, std::vector<std::string> negation_cues,
               std::vector<std::string> uncertainty_cues, std::vector<std::string> scope_breakers,
               std::size_t window);

  // Throws kInvalidArgument naming the offending categories or list.
  void validate() const;

  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::string>& negation_cues() const { return negation_cues_; }
  const std::vector<std::string>& uncertainty_cues() const { return uncertainty_cues_; }
  const std::vector<std::string>& scope_breakers() const { return scope_breakers_; }
  std::size_t window() const { return window_; }
  const std::vector<std::string>& phrases(Category c) const;

 private:
  std::vector<Entry> entries_;
  std::vector<std::string> negation_cues_;
  std::vector<std::string> uncertainty_cues_;
  std::vector<std::string> scope_breakers_;
  std::size_t window_ = 5;
};

const LabelLexicon& default_lexicon();

std::string serialize_lexicon(const LabelLexicon& lexicon);
LabelLexicon parse_lexicon(std::string_view text);
LabelLexicon load_lexicon(const std::filesystem::path& path);

// Per sentence: phrase matches (word-boundary, case-insensitive) are negative
// when a negation cue ends fewer than `window` tokens before the phrase,
// uncertain for an uncertainty cue, positive otherwise. The nearest cue wins,
// and a scope breaker between cue and phrase cancels the cue. Repeated
// mentions resolve by precedence. No Finding is positive iff the report has
// content and no category other than Support Devices is positive or uncertain.
DiseaseLabels label_report(std::string_view report, const LabelLexicon& lexicon);

std::string labels_to_json(const DiseaseLabels& labels);

}  // namespace kerm
