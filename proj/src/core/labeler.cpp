#include "kerm/labeler.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "No Finding",   "Enlarged Cardiomediastinum", "Cardiomegaly",     "Lung Opacity",
    "Lung Lesion",  "Edema",                      "Consolidation",    "Pneumonia",
    "Atelectasis",  "Pneumothorax",               "Pleural Effusion", "Pleural Other",
    "Fracture",     "Support Devices",
};

constexpr const char* kLexiconFormat = "kerm-lexicon";
constexpr int kLexiconVersion = 1;

using Tokens = std::vector<std::string>;

// Occurrences of needle in hay as [start, end) token ranges.
std::vector<std::pair<std::size_t, std::size_t>> find_all(const Tokens& hay, const Tokens& needle) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (needle.empty() || needle.size() > hay.size()) return out;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i)))
      out.emplace_back(i, i + needle.size());
  return out;
}

struct CompiledLexicon {
  std::vector<std::pair<Category, Tokens>> phrases;
  std::vector<Tokens> negation;
  std::vector<Tokens> uncertainty;
  std::vector<std::string> breakers;
};

CompiledLexicon compile(const LabelLexicon& lexicon) {
  CompiledLexicon c;
  for (const auto& e : lexicon.entries())
    for (const auto& p : e.phrases) c.phrases.emplace_back(e.category, tokenize(p));
  for (const auto& cue : lexicon.negation_cues()) c.negation.push_back(tokenize(cue));
  for (const auto& cue : lexicon.uncertainty_cues()) c.uncertainty.push_back(tokenize(cue));
  for (const auto& b : lexicon.scope_breakers()) {
    auto t = tokenize(b);
    if (t.size() == 1) c.breakers.push_back(t[0]);
  }
  return c;
}

Mention classify(const Tokens& sentence, std::size_t start, const CompiledLexicon& lex,
                 std::size_t window) {
  // Nearest cue ending at or before `start`; uncertainty wins ties.
  std::size_t best_end = 0;
  Mention best = Mention::kPositive;
  bool found = false;
  auto consider = [&](const std::vector<Tokens>& cues, Mention kind) {
    for (const Tokens& cue : cues) {
      for (auto [s, e] : find_all(sentence, cue)) {
        if (e > start || start - e >= window) continue;
        bool broken = false;
        for (std::size_t k = e; k < start && !broken; ++k)
          broken = std::find(lex.breakers.begin(), lex.breakers.end(), sentence[k]) != lex.breakers.end();
        if (broken) continue;
        if (!found || e > best_end || (e == best_end && kind == Mention::kUncertain)) {
          found = true;
          best_end = e;
          best = kind;
        }
      }
    }
  };
  consider(lex.negation, Mention::kNegative);
  consider(lex.uncertainty, Mention::kUncertain);
  return best;
}

LabelLexicon build_default() {
  using C = Category;
  std::vector<LabelLexicon::Entry> entries = {
      {C::kEnlargedCardiomediastinum,
       {"enlarged cardiomediastinum", "widened mediastinum", "mediastinal widening",
        "enlarged cardiomediastinal silhouette"}},
      {C::kCardiomegaly, {"cardiomegaly", "enlarged heart", "cardiac enlargement"}},
      {C::kLungOpacity, {"lung opacity", "opacity", "opacities", "airspace disease"}},
      {C::kLungLesion, {"lung lesion", "nodule", "nodules", "pulmonary mass"}},
      {C::kEdema, {"edema", "pulmonary edema", "vascular congestion"}},
      {C::kConsolidation, {"consolidation", "consolidations"}},
      {C::kPneumonia, {"pneumonia", "infectious process"}},
      {C::kAtelectasis, {"atelectasis", "atelectatic change", "volume loss"}},
      {C::kPneumothorax, {"pneumothorax", "pneumothoraces"}},
      {C::kPleuralEffusion, {"pleural effusion", "pleural effusions", "effusion", "effusions"}},
      {C::kPleuralOther, {"pleural thickening", "pleural scarring"}},
      {C::kFracture, {"fracture", "fractures", "rib fracture"}},
      {C::kSupportDevices,
       {"support devices", "endotracheal tube", "pacemaker", "central venous catheter",
        "nasogastric tube"}},
  };
  return LabelLexicon(std::move(entries),
                      {"no", "without", "free of", "negative for", "clear of", "resolved"},
                      {"possible", "may", "cannot exclude", "suspicious", "likely"},
                      {"but", "however", "although", "though", "except"}, 5);
}

}  // namespace

std::string_view category_name(Category c) {
  return kCategoryNames.at(static_cast<std::size_t>(c));
}

std::optional<Category> category_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    if (kCategoryNames[i] == name) return category_at(i);
  return std::nullopt;
}

std::string_view mention_name(Mention m) {
  switch (m) {
    case Mention::kPositive: return "positive";
    case Mention::kNegative: return "negative";
    case Mention::kUncertain: return "uncertain";
    case Mention::kUnmentioned: break;
  }
  return "unmentioned";
}

std::optional<Mention> mention_from_name(std::string_view name) {
  for (Mention m : {Mention::kUnmentioned, Mention::kNegative, Mention::kUncertain, Mention::kPositive})
    if (mention_name(m) == name) return m;
  return std::nullopt;
}

std::string_view policy_name(UncertaintyPolicy p) {
  return p == UncertaintyPolicy::kUncertainPositive ? "uncertain-positive" : "uncertain-negative";
}

UncertaintyPolicy policy_from_name(std::string_view name) {
  if (name == "uncertain-positive") return UncertaintyPolicy::kUncertainPositive;
  if (name == "uncertain-negative") return UncertaintyPolicy::kUncertainNegative;
  fail(ErrorCode::kInvalidArgument, "unknown uncertainty policy: " + std::string(name));
}

std::array<bool, kCategoryCount> binarize(const DiseaseLabels& labels, UncertaintyPolicy policy) {
  std::array<bool, kCategoryCount> out{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    Mention m = labels.slots[i];
    out[i] = m == Mention::kPositive ||
             (m == Mention::kUncertain && policy == UncertaintyPolicy::kUncertainPositive);
  }
  return out;
}

LabelLexicon::LabelLexicon(std::vector<Entry> entries, std::vector<std::string> negation_cues,
                           std::vector<std::string> uncertainty_cues,
                           std::vector<std::string> scope_breakers, std::size_t window)
    : entries_(std::move(entries)),
      negation_cues_(std::move(negation_cues)),
      uncertainty_cues_(std::move(uncertainty_cues)),
      scope_breakers_(std::move(scope_breakers)),
      window_(window) {}

void LabelLexicon::validate() const {
  std::array<bool, kCategoryCount> present{};
  std::map<std::string, Category> owner;
  for (const Entry& e : entries_) {
    std::string name(category_name(e.category));
    if (e.category == Category::kNoFinding)
      fail(ErrorCode::kInvalidArgument, "lexicon: No Finding is derived and cannot list phrases");
    auto idx = static_cast<std::size_t>(e.category);
    if (present[idx]) fail(ErrorCode::kInvalidArgument, "lexicon: category " + name + " listed twice");
    present[idx] = true;
    if (e.phrases.empty()) fail(ErrorCode::kInvalidArgument, "lexicon: category " + name + " has no phrases");
    for (const std::string& p : e.phrases) {
      std::string key = join(tokenize(p), " ");
      if (key.empty()) fail(ErrorCode::kInvalidArgument, "lexicon: empty phrase under " + name);
      auto [it, inserted] = owner.emplace(key, e.category);
      if (!inserted) {
        fail(ErrorCode::kInvalidArgument,
             "lexicon: phrase \"" + key + "\" assigned to both " +
                 std::string(category_name(it->second)) + " and " + name);
      }
    }
  }
  for (std::size_t i = 1; i < kCategoryCount; ++i)
    if (!present[i])
      fail(ErrorCode::kInvalidArgument,
           "lexicon: category " + std::string(category_name(category_at(i))) + " missing");
  if (negation_cues_.empty()) fail(ErrorCode::kInvalidArgument, "lexicon: negation cue list is empty");
  if (uncertainty_cues_.empty()) fail(ErrorCode::kInvalidArgument, "lexicon: uncertainty cue list is empty");
  if (window_ == 0) fail(ErrorCode::kInvalidArgument, "lexicon: window must be positive");
}

const std::vector<std::string>& LabelLexicon::phrases(Category c) const {
  for (const Entry& e : entries_)
    if (e.category == c) return e.phrases;
  fail(ErrorCode::kInvalidArgument, "lexicon has no entry for " + std::string(category_name(c)));
}

const LabelLexicon& default_lexicon() {
  static const LabelLexicon lexicon = [] {
    LabelLexicon l = build_default();
    l.validate();
    return l;
  }();
  return lexicon;
}

std::string serialize_lexicon(const LabelLexicon& lexicon) {
  nlohmann::ordered_json j;
  j["format"] = kLexiconFormat;
  j["version"] = kLexiconVersion;
  j["window"] = lexicon.window();
  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  for (const auto& e : lexicon.entries())
    cats.push_back({{"category", std::string(category_name(e.category))}, {"phrases", e.phrases}});
  j["categories"] = cats;
  j["negation_cues"] = lexicon.negation_cues();
  j["uncertainty_cues"] = lexicon.uncertainty_cues();
  j["scope_breakers"] = lexicon.scope_breakers();
  return j.dump(2) + "\n";
}

LabelLexicon parse_lexicon(std::string_view text) {
  LabelLexicon lexicon;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != kLexiconFormat) fail(ErrorCode::kParse, "lexicon: wrong format tag");
    if (j.value("version", 0) != kLexiconVersion) fail(ErrorCode::kParse, "lexicon: unsupported version");
    std::vector<LabelLexicon::Entry> entries;
    for (const auto& c : j.at("categories")) {
      auto name = c.at("category").get<std::string>();
      auto cat = category_from_name(name);
      if (!cat) fail(ErrorCode::kInvalidArgument, "lexicon: unknown category " + name);
      entries.push_back({*cat, c.at("phrases").get<std::vector<std::string>>()});
    }
    lexicon = LabelLexicon(std::move(entries), j.at("negation_cues").get<std::vector<std::string>>(),
                           j.at("uncertainty_cues").get<std::vector<std::string>>(),
                           j.value("scope_breakers", std::vector<std::string>{}),
                           j.value("window", std::size_t{5}));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("lexicon: ") + e.what());
  }
  lexicon.validate();
  return lexicon;
}

LabelLexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(io::read_file(path));
}

DiseaseLabels label_report(std::string_view report, const LabelLexicon& lexicon) {
  DiseaseLabels labels;
  auto sentences = split_sentences(report);
  if (sentences.empty()) return labels;

  CompiledLexicon lex = compile(lexicon);
  for (const std::string& sentence : sentences) {
    Tokens tokens = tokenize(sentence);
    for (const auto& [category, phrase] : lex.phrases) {
      for (auto [s, e] : find_all(tokens, phrase)) {
        Mention m = classify(tokens, s, lex, lexicon.window());
        labels[category] = std::max(labels[category], m);
      }
    }
  }

  bool finding = false;
  for (std::size_t i = 1; i < kCategoryCount; ++i) {
    if (category_at(i) == Category::kSupportDevices) continue;
    Mention m = labels.slots[i];
    finding = finding || m == Mention::kPositive || m == Mention::kUncertain;
  }
  labels[Category::kNoFinding] = finding ? Mention::kUnmentioned : Mention::kPositive;
  return labels;
}

std::string labels_to_json(const DiseaseLabels& labels) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    j[std::string(category_name(category_at(i)))] = std::string(mention_name(labels.slots[i]));
  return j.dump();
}

}  // namespace kerm
