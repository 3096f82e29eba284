#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kerm {

inline constexpr std::size_t kDefaultDimension = 256;

// Unit-norm real vector. source_norm keeps the Euclidean norm of the raw
// vector before normalization.
class Embedding {
 public:
  Embedding() = default;

  // Throws on empty, non-finite or zero-norm input.
  static Embedding normalized(std::vector<double> raw);

  std::span<const double> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }
  double source_norm() const { return source_norm_; }

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
  double source_norm_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
// dot / (|a| |b|), for vectors that are not known to be unit-norm.
double cosine(std::span<const double> a, std::span<const double> b);

struct ImageRecord {
  std::string id;
  std::optional<std::vector<double>> feature_vector;
  std::optional<std::string> paired_report;
};

// Noise used to synthesize an image embedding from its paired report.
struct ImageSynthesis {
  double sigma = 0.1;
  std::uint64_t seed = 0;
};

// Shared similarity space for texts and images. Implementations provide the
// raw text vector; normalization, dimension checks and image synthesis live
// here so that every embedder obeys the same contract.
class Embedder {
 public:
  explicit Embedder(ImageSynthesis synthesis = {}) : synthesis_(synthesis) {}
  virtual ~Embedder() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;

  // Throws "empty text" when the text has no content.
  Embedding embed_text(std::string_view text) const;

  // Stored feature vector, normalized; otherwise embed_text(paired_report)
  // plus seeded Gaussian noise, renormalized.
  Embedding embed_image(const ImageRecord& record) const;

  const ImageSynthesis& synthesis() const { return synthesis_; }

 protected:
  // Receives whitespace-collapsed, non-empty text.
  virtual std::vector<double> raw_text(std::string_view text) const = 0;

 private:
  Embedding checked(std::vector<double> raw) const;

  ImageSynthesis synthesis_;
};

// Signed feature hashing of word unigrams and bigrams.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension, ImageSynthesis synthesis = {});

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "hashing-" + std::to_string(dimension_); }

  // Unnormalized signed count vector for text.
  std::vector<double> hashed_counts(std::string_view text) const;

 protected:
  std::vector<double> raw_text(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

// Adapts an arbitrary function, e.g. a bridge to an external model.
class CallbackEmbedder final : public Embedder {
 public:
  using TextFn = std::function<std::vector<double>(std::string_view)>;

  CallbackEmbedder(std::size_t dimension, TextFn fn, std::string name = "callback",
                   ImageSynthesis synthesis = {});

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return name_; }

 protected:
  std::vector<double> raw_text(std::string_view text) const override { return fn_(text); }

 private:
  std::size_t dimension_;
  TextFn fn_;
  std::string name_;
};

// Replays vectors recorded from another embedder, keyed by casefolded,
// whitespace-collapsed text. File format: JSON Lines {"text","vector"}.
class ReplayEmbedder final : public Embedder {
 public:
  ReplayEmbedder(std::size_t dimension, std::unordered_map<std::string, std::vector<double>> table,
                 ImageSynthesis synthesis = {});

  static ReplayEmbedder load(const std::filesystem::path& path, ImageSynthesis synthesis = {});
  static std::string record(const Embedder& source, std::span<const std::string> texts);

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "replay"; }

 protected:
  std::vector<double> raw_text(std::string_view text) const override;

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// Image feature files: JSON Lines {"id", "features": [D floats], "report"?}.
std::vector<ImageRecord> parse_image_records(std::string_view text);
std::vector<ImageRecord> load_image_records(const std::filesystem::path& path);
std::string serialize_image_records(std::span<const ImageRecord> records);

}  // namespace kerm
