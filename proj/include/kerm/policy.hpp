#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kerm/corpus.hpp"
#include "kerm/embedding.hpp"

namespace kerm {

using TokenId = std::uint32_t;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;

// Lowercased words with sentence punctuation ('.', ',', '!', '?', ';', ':')
// split off as separate tokens.
std::vector<std::string> policy_tokenize(std::string_view text);

bool is_sentence_terminator(std::string_view token);

class Vocabulary {
 public:
  Vocabulary();

  // Specials, then every distinct token of the texts in sorted order.
  static Vocabulary build(std::span<const std::string> texts);
  // Full token list; the first three entries must be the specials.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::string hash() const;

  // BOS, tokens, EOS. Out-of-vocabulary tokens map to UNK and are counted.
  std::vector<TokenId> encode(std::string_view text, std::size_t* unk_count = nullptr) const;
  // Skips specials; punctuation attaches to the preceding word.
  std::string decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Sentence membership of sampled actions (the sequence after BOS). A sentence
// ends at a terminator token. An EOS right after a terminator belongs to the
// sentence it closes. Every action belongs to exactly one sentence.
struct Segmentation {
  std::vector<std::string> sentences;
  std::vector<std::size_t> token_sentence;
};

Segmentation segment_actions(const Vocabulary& vocab, std::span<const TokenId> actions);

struct PolicyShape {
  std::size_t vocab = 0;
  std::size_t width = 32;
  std::size_t cond = kDefaultDimension;

  bool operator==(const PolicyShape&) const = default;
};

// Token embedding (V x E), conditioning projection (D x E) and output
// projection (E x V), stored contiguously in that order. Also used as the
// gradient container.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(PolicyShape shape);

  static PolicyParams random(PolicyShape shape, std::uint64_t seed, double sigma = 0.02);

  const PolicyShape& shape() const { return shape_; }
  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double& embedding(std::size_t v, std::size_t e) { return values_[v * shape_.width + e]; }
  double embedding(std::size_t v, std::size_t e) const { return values_[v * shape_.width + e]; }
  double& cond_projection(std::size_t d, std::size_t e) { return values_[cond_offset() + d * shape_.width + e]; }
  double cond_projection(std::size_t d, std::size_t e) const { return values_[cond_offset() + d * shape_.width + e]; }
  double& output_projection(std::size_t e, std::size_t v) { return values_[out_offset() + e * shape_.vocab + v]; }
  double output_projection(std::size_t e, std::size_t v) const { return values_[out_offset() + e * shape_.vocab + v]; }

  bool operator==(const PolicyParams&) const = default;

 private:
  std::size_t cond_offset() const { return shape_.vocab * shape_.width; }
  std::size_t out_offset() const { return cond_offset() + shape_.cond * shape_.width; }

  PolicyShape shape_;
  std::vector<double> values_;
};

// Mean of the image embedding and the fact embeddings, renormalized. With no
// facts this is exactly the image embedding.
Embedding condition(const ImageRecord& image, std::span<const Fact> facts, const Embedder& embedder);

struct SequenceLogProb {
  double total = 0.0;
  std::vector<double> per_token;  // one per token after BOS
  std::size_t unk_substitutions = 0;
};

// Step i: logits = W_out^T (emb(y_{i-1}) + W_cond^T cond), log-softmax.
SequenceLogProb logprob(const PolicyParams& params, std::span<const double> cond,
                        std::span<const TokenId> sequence);

// Full next-token distribution after `previous`.
std::vector<double> next_token_probs(const PolicyParams& params, std::span<const double> cond,
                                     TokenId previous);

struct SampleOptions {
  std::size_t max_len = 48;
  double temperature = 1.0;  // 0 means greedy argmax
};

struct Sample {
  std::vector<TokenId> tokens;      // starts with BOS
  std::vector<double> step_logprob; // untempered log p of each action
  bool finished = false;            // EOS emitted before max_len
};

Sample sample(const PolicyParams& params, std::span<const double> cond, const SampleOptions& options,
              std::uint64_t seed);

struct LossAndGrad {
  double loss = 0.0;
  PolicyParams grad;
};

// -sum_i w_i log p(y_i | y_{i-1}, cond) with its exact gradient.
LossAndGrad weighted_nll_and_grad(const PolicyParams& params, std::span<const double> cond,
                                  std::span<const TokenId> sequence, std::span<const double> weights);

LossAndGrad ce_loss_and_grad(const PolicyParams& params, std::span<const double> cond,
                             std::span<const TokenId> reference);

// REINFORCE surrogate -sum_t (R_t - baseline) log p(a_t | s_t) with the sample
// held fixed. rewards align with the actions after BOS.
LossAndGrad rl_loss_and_grad(const PolicyParams& params, std::span<const double> cond,
                             std::span<const TokenId> sampled, std::span<const double> rewards,
                             double baseline = 0.0);

struct Checkpoint {
  PolicyParams params;
  Vocabulary vocab;
  std::uint64_t seed = 0;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text, const Vocabulary* expected_vocab = nullptr);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// Refuses to load when expected_vocab is given and its hash differs.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary* expected_vocab = nullptr);

}  // namespace kerm
