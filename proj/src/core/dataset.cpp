#include "kerm/dataset.hpp"

#include <random>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

constexpr std::array<const char*, 3> kPositiveTemplates = {
    "There is {p}.", "{P} is seen.", "Findings are consistent with {p}."};
constexpr std::array<const char*, 3> kNegativeTemplates = {
    "No {p}.", "There is no {p}.", "No evidence of {p}."};
constexpr std::array<const char*, 3> kUncertainTemplates = {
    "Possible {p}.", "Cannot exclude {p}.", "Findings may represent {p}."};
constexpr std::array<const char*, 4> kFiller = {
    "Heart size is normal.", "The osseous structures are intact.", "The trachea is midline.",
    "Lungs are well expanded."};
constexpr const char* kNormalImpression = "No acute cardiopulmonary process.";
constexpr std::array<const char*, 5> kHistories = {
    "", "History of smoking.", "Fever and cough.", "Shortness of breath.", "Recent thoracic surgery."};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::string render(const char* templ, const std::string& phrase) {
  std::string out(templ);
  std::string capital = phrase;
  if (!capital.empty()) capital[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(capital[0])));
  if (auto pos = out.find("{p}"); pos != std::string::npos) out.replace(pos, 3, phrase);
  if (auto pos = out.find("{P}"); pos != std::string::npos) out.replace(pos, 3, capital);
  return out;
}

}  // namespace

std::vector<TrainingRecord> make_synthetic_dataset(const SyntheticOptions& options,
                                                   const LabelLexicon& lexicon,
                                                   const Embedder& embedder) {
  if (options.n == 0) fail(ErrorCode::kInvalidArgument, "dataset size must be positive");
  std::mt19937_64 rng(options.seed);
  std::vector<TrainingRecord> records;
  records.reserve(options.n);

  for (std::size_t i = 0; i < options.n; ++i) {
    DiseaseLabels labels;
    std::vector<std::string> sentences;
    std::vector<Category> mentioned;
    bool finding = false;
    for (std::size_t c = 1; c < kCategoryCount; ++c) {
      Category cat = category_at(c);
      double u = uniform01(rng);
      double pos = options.positive_rate[c];
      Mention m = Mention::kUnmentioned;
      if (u < pos) m = Mention::kPositive;
      else if (u < pos + options.uncertain_rate) m = Mention::kUncertain;
      else if (u < pos + options.uncertain_rate + options.negative_rate) m = Mention::kNegative;
      if (m == Mention::kUnmentioned) continue;

      const auto& phrases = lexicon.phrases(cat);
      const std::string& phrase = phrases[pick(rng, phrases.size())];
      const char* templ = m == Mention::kPositive    ? kPositiveTemplates[pick(rng, kPositiveTemplates.size())]
                          : m == Mention::kUncertain ? kUncertainTemplates[pick(rng, kUncertainTemplates.size())]
                                                     : kNegativeTemplates[pick(rng, kNegativeTemplates.size())];
      sentences.push_back(render(templ, phrase));
      labels[cat] = m;
      mentioned.push_back(cat);
      if (cat != Category::kSupportDevices && m != Mention::kNegative) finding = true;
    }
    if (!finding) sentences.insert(sentences.begin(), kNormalImpression);
    sentences.emplace_back(kFiller[pick(rng, kFiller.size())]);
    labels[Category::kNoFinding] = finding ? Mention::kUnmentioned : Mention::kPositive;

    TrainingRecord r;
    r.image.id = "img-" + std::to_string(i);
    r.reference = join(sentences, " ");
    r.labels = labels;
    if (mentioned.empty()) {
      r.context.indication = "Routine examination.";
    } else {
      std::string name(category_name(mentioned[pick(rng, mentioned.size())]));
      r.context.indication = "Evaluate for " + casefold(name) + ".";
    }
    r.context.history = kHistories[pick(rng, kHistories.size())];

    ImageRecord source{r.image.id, std::nullopt, r.reference};
    Embedding e = embedder.embed_image(source);
    r.image.feature_vector = std::vector<double>(e.values().begin(), e.values().end());
    records.push_back(std::move(r));
  }
  return records;
}

std::string serialize_dataset(std::span<const TrainingRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.image.id;
    if (r.image.feature_vector) j["features"] = *r.image.feature_vector;
    j["indication"] = r.context.indication;
    j["history"] = r.context.history;
    j["report"] = r.reference;
    if (r.labels) j["labels"] = nlohmann::ordered_json::parse(labels_to_json(*r.labels));
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<TrainingRecord> parse_dataset(std::string_view text) {
  std::vector<TrainingRecord> out;
  std::size_t line_no = 0;
  for (const std::string& line : io::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TrainingRecord r;
      r.image.id = j.at("id").get<std::string>();
      if (j.contains("features")) r.image.feature_vector = j["features"].get<std::vector<double>>();
      r.context.indication = j.value("indication", "");
      r.context.history = j.value("history", "");
      r.reference = j.at("report").get<std::string>();
      if (collapse_whitespace(r.reference).empty())
        fail(ErrorCode::kParse, "dataset line " + std::to_string(line_no) + ": empty report");
      if (!r.image.feature_vector) r.image.paired_report = r.reference;
      if (j.contains("labels")) {
        DiseaseLabels labels;
        for (std::size_t c = 0; c < kCategoryCount; ++c) {
          auto m = mention_from_name(j["labels"].at(std::string(category_name(category_at(c)))).get<std::string>());
          if (!m) fail(ErrorCode::kParse, "dataset line " + std::to_string(line_no) + ": bad label value");
          labels.slots[c] = *m;
        }
        r.labels = labels;
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(std::span<const TrainingRecord> records, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_dataset(records));
}

std::vector<TrainingRecord> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(io::read_file(path));
}

}  // namespace kerm
