#include "kerm/embedding.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {

Embedding Embedding::normalized(std::vector<double> raw) {
  if (raw.empty()) fail(ErrorCode::kInvalidArgument, "empty vector");
  for (double x : raw)
    if (!std::isfinite(x)) fail(ErrorCode::kNumeric, "non-finite embedding entry");
  double norm = l2_norm(raw);
  if (norm == 0.0) fail(ErrorCode::kNumeric, "zero-norm embedding");
  for (double& x : raw) x /= norm;
  Embedding e;
  e.values_ = std::move(raw);
  e.source_norm_ = norm;
  return e;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorCode::kDimensionMismatch, "dimension mismatch: " + std::to_string(a.size()) +
                                            " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / (l2_norm(a) * l2_norm(b));
}

Embedding Embedder::checked(std::vector<double> raw) const {
  if (raw.size() != dimension())
    fail(ErrorCode::kDimensionMismatch, "embedder " + name() + " returned dimension " +
                                            std::to_string(raw.size()) + ", expected " +
                                            std::to_string(dimension()));
  return Embedding::normalized(std::move(raw));
}

Embedding Embedder::embed_text(std::string_view text) const {
  std::string collapsed = collapse_whitespace(text);
  if (collapsed.empty()) fail(ErrorCode::kInvalidArgument, "empty text");
  return checked(raw_text(collapsed));
}

Embedding Embedder::embed_image(const ImageRecord& record) const {
  if (record.feature_vector) return checked(*record.feature_vector);
  if (!record.paired_report) fail(ErrorCode::kInvalidArgument, "unembeddable image record");

  Embedding base = embed_text(*record.paired_report);
  if (synthesis_.sigma == 0.0) return base;

  std::mt19937_64 rng(splitmix64(synthesis_.seed ^ fnv1a64(record.id)));
  std::normal_distribution<double> noise(0.0, synthesis_.sigma);
  std::vector<double> v(base.values().begin(), base.values().end());
  for (double& x : v) x += noise(rng);
  return checked(std::move(v));
}

HashingEmbedder::HashingEmbedder(std::size_t dimension, ImageSynthesis synthesis)
    : Embedder(synthesis), dimension_(dimension) {
  if (dimension == 0) fail(ErrorCode::kInvalidArgument, "dimension must be positive");
}

std::vector<double> HashingEmbedder::hashed_counts(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  auto add = [&](const std::string& feature) {
    std::uint64_t h = fnv1a64(feature);
    double sign = ((h >> 32) & 1U) ? -1.0 : 1.0;
    v[h % dimension_] += sign;
  };
  std::vector<std::string> tokens = tokenize(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add("u:" + tokens[i]);
    if (i + 1 < tokens.size()) add("b:" + tokens[i] + " " + tokens[i + 1]);
  }
  return v;
}

std::vector<double> HashingEmbedder::raw_text(std::string_view text) const {
  if (tokenize(text).empty()) fail(ErrorCode::kInvalidArgument, "empty text");
  return hashed_counts(text);
}

CallbackEmbedder::CallbackEmbedder(std::size_t dimension, TextFn fn, std::string name,
                                   ImageSynthesis synthesis)
    : Embedder(synthesis), dimension_(dimension), fn_(std::move(fn)), name_(std::move(name)) {
  if (!fn_) fail(ErrorCode::kInvalidArgument, "callback embedder needs a function");
}

ReplayEmbedder::ReplayEmbedder(std::size_t dimension,
                               std::unordered_map<std::string, std::vector<double>> table,
                               ImageSynthesis synthesis)
    : Embedder(synthesis), dimension_(dimension), table_(std::move(table)) {}

ReplayEmbedder ReplayEmbedder::load(const std::filesystem::path& path, ImageSynthesis synthesis) {
  std::unordered_map<std::string, std::vector<double>> table;
  std::size_t dimension = 0;
  std::size_t line_no = 0;
  for (const std::string& line : io::split_lines(io::read_file(path))) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto vec = j.at("vector").get<std::vector<double>>();
      if (dimension == 0) dimension = vec.size();
      if (vec.size() != dimension)
        fail(ErrorCode::kDimensionMismatch,
             "replay line " + std::to_string(line_no) + ": inconsistent dimension");
      table[casefold(collapse_whitespace(j.at("text").get<std::string>()))] = std::move(vec);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "replay line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (dimension == 0) fail(ErrorCode::kParse, "replay file has no vectors");
  return ReplayEmbedder(dimension, std::move(table), synthesis);
}

std::string ReplayEmbedder::record(const Embedder& source, std::span<const std::string> texts) {
  std::string out;
  for (const std::string& t : texts) {
    auto e = source.embed_text(t);
    nlohmann::ordered_json j = {{"text", t}, {"vector", std::vector<double>(e.values().begin(), e.values().end())}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<double> ReplayEmbedder::raw_text(std::string_view text) const {
  auto it = table_.find(casefold(text));
  if (it == table_.end()) fail(ErrorCode::kInvalidArgument, "no recorded vector for text: " + std::string(text));
  return it->second;
}

std::vector<ImageRecord> parse_image_records(std::string_view text) {
  std::vector<ImageRecord> records;
  std::size_t line_no = 0;
  for (const std::string& line : io::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ImageRecord r;
      r.id = j.at("id").get<std::string>();
      if (j.contains("features")) r.feature_vector = j["features"].get<std::vector<double>>();
      if (j.contains("report")) r.paired_report = j["report"].get<std::string>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParse, "image record line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<ImageRecord> load_image_records(const std::filesystem::path& path) {
  return parse_image_records(io::read_file(path));
}

std::string serialize_image_records(std::span<const ImageRecord> records) {
  std::string out;
  for (const ImageRecord& r : records) {
    nlohmann::ordered_json j = {{"id", r.id}};
    if (r.feature_vector) j["features"] = *r.feature_vector;
    if (r.paired_report) j["report"] = *r.paired_report;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace kerm
