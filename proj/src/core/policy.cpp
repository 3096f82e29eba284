#include "kerm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <json.hpp>

#include "kerm/error.hpp"
#include "kerm/io.hpp"
#include "kerm/text.hpp"

namespace kerm {
namespace {

constexpr const char* kCheckpointFormat = "kerm-checkpoint";
constexpr int kCheckpointVersion = 1;

bool is_split_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

// h = W_cond^T cond, the conditioning contribution shared by every step.
std::vector<double> project_condition(const PolicyParams& p, std::span<const double> cond) {
  const auto& s = p.shape();
  if (cond.size() != s.cond)
    fail(ErrorCode::kDimensionMismatch, "conditioning dimension " + std::to_string(cond.size()) +
                                            " does not match policy dimension " + std::to_string(s.cond));
  std::vector<double> h(s.width, 0.0);
  for (std::size_t d = 0; d < s.cond; ++d) {
    double c = cond[d];
    if (c == 0.0) continue;
    for (std::size_t e = 0; e < s.width; ++e) h[e] += p.cond_projection(d, e) * c;
  }
  return h;
}

void hidden_state(const PolicyParams& p, const std::vector<double>& projected, TokenId prev,
                  std::vector<double>& h) {
  const auto& s = p.shape();
  h.resize(s.width);
  for (std::size_t e = 0; e < s.width; ++e) h[e] = p.embedding(prev, e) + projected[e];
}

void logits(const PolicyParams& p, const std::vector<double>& h, std::vector<double>& z) {
  const auto& s = p.shape();
  z.assign(s.vocab, 0.0);
  for (std::size_t e = 0; e < s.width; ++e) {
    double he = h[e];
    for (std::size_t v = 0; v < s.vocab; ++v) z[v] += p.output_projection(e, v) * he;
  }
}

// In place: z becomes log-softmax(z).
void log_softmax(std::vector<double>& z) {
  double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - mx);
  double lse = mx + std::log(sum);
  for (double& x : z) x -= lse;
}

TokenId clamp_token(TokenId t, std::size_t vocab, std::size_t& unk) {
  if (t < vocab) return t;
  ++unk;
  return kUnk;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<std::string> policy_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string collapsed = collapse_whitespace(text);
  std::size_t i = 0;
  while (i < collapsed.size()) {
    std::size_t j = collapsed.find(' ', i);
    if (j == std::string::npos) j = collapsed.size();
    std::string w = casefold(std::string_view(collapsed).substr(i, j - i));
    std::vector<std::string> trailing;
    while (!w.empty() && is_split_punct(w.back())) {
      trailing.emplace_back(1, w.back());
      w.pop_back();
    }
    if (!w.empty()) out.push_back(std::move(w));
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
    i = j + 1;
  }
  return out;
}

bool is_sentence_terminator(std::string_view token) {
  return token == "." || token == "!" || token == "?";
}

Vocabulary::Vocabulary() : tokens_{"<bos>", "<eos>", "<unk>"} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<std::string> distinct;
  for (const auto& t : texts)
    for (auto& tok : policy_tokenize(t)) distinct.insert(std::move(tok));
  std::vector<std::string> tokens = {"<bos>", "<eos>", "<unk>"};
  for (const auto& t : distinct)
    if (t != "<bos>" && t != "<eos>" && t != "<unk>") tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3 || tokens[kBos] != "<bos>" || tokens[kEos] != "<eos>" || tokens[kUnk] != "<unk>")
    fail(ErrorCode::kInvalidArgument, "vocabulary must start with <bos>, <eos>, <unk>");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i)
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second)
      fail(ErrorCode::kInvalidArgument, "duplicate vocabulary token: " + v.tokens_[i]);
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) return tokens_[kUnk];
  return tokens_[id];
}

std::string Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("");
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64(std::string_view("\0", 1), h);
  }
  return hex64(h);
}

std::vector<TokenId> Vocabulary::encode(std::string_view text, std::size_t* unk_count) const {
  std::vector<TokenId> ids = {kBos};
  std::size_t unk = 0;
  for (const auto& t : policy_tokenize(text)) {
    TokenId i = id(t);
    if (i == kUnk) ++unk;
    ids.push_back(i);
  }
  ids.push_back(kEos);
  if (unk_count) *unk_count = unk;
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kBos || id == kEos || id == kUnk || id >= tokens_.size()) continue;
    const std::string& t = tokens_[id];
    bool punct = t.size() == 1 && is_split_punct(t[0]);
    if (!out.empty() && !punct) out.push_back(' ');
    out += t;
  }
  return out;
}

Segmentation segment_actions(const Vocabulary& vocab, std::span<const TokenId> actions) {
  Segmentation seg;
  seg.token_sentence.reserve(actions.size());
  std::vector<TokenId> current;
  bool open = false;
  for (TokenId a : actions) {
    if (a == kEos && !open && !seg.sentences.empty()) {
      seg.token_sentence.push_back(seg.sentences.size() - 1);
      continue;
    }
    if (!open) {
      seg.sentences.emplace_back();
      current.clear();
      open = true;
    }
    seg.token_sentence.push_back(seg.sentences.size() - 1);
    current.push_back(a);
    seg.sentences.back() = vocab.decode(current);
    if (is_sentence_terminator(vocab.token(a)) && a != kUnk) open = false;
  }
  return seg;
}

PolicyParams::PolicyParams(PolicyShape shape) : shape_(shape) {
  if (shape.vocab == 0 || shape.width == 0 || shape.cond == 0)
    fail(ErrorCode::kInvalidArgument, "policy shape must be positive");
  values_.assign(shape.vocab * shape.width + shape.cond * shape.width + shape.width * shape.vocab, 0.0);
}

PolicyParams PolicyParams::random(PolicyShape shape, std::uint64_t seed, double sigma) {
  PolicyParams p(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& x : p.values_) x = dist(rng);
  return p;
}

Embedding condition(const ImageRecord& image, std::span<const Fact> facts, const Embedder& embedder) {
  Embedding img = embedder.embed_image(image);
  if (facts.empty()) return img;
  std::vector<double> sum(img.values().begin(), img.values().end());
  for (const Fact& f : facts) {
    Embedding e = embedder.embed_text(f.text);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e.values()[i];
  }
  double n = static_cast<double>(facts.size() + 1);
  for (double& x : sum) x /= n;
  return Embedding::normalized(std::move(sum));
}

SequenceLogProb logprob(const PolicyParams& params, std::span<const double> cond,
                        std::span<const TokenId> sequence) {
  if (sequence.empty() || sequence.front() != kBos)
    fail(ErrorCode::kInvalidArgument, "sequence must begin with BOS");
  SequenceLogProb out;
  auto projected = project_condition(params, cond);
  std::vector<double> h, z;
  std::size_t V = params.shape().vocab;
  for (std::size_t i = 1; i < sequence.size(); ++i) {
    TokenId prev = clamp_token(sequence[i - 1], V, out.unk_substitutions);
    TokenId cur = clamp_token(sequence[i], V, out.unk_substitutions);
    hidden_state(params, projected, prev, h);
    logits(params, h, z);
    log_softmax(z);
    out.per_token.push_back(z[cur]);
    out.total += z[cur];
  }
  return out;
}

std::vector<double> next_token_probs(const PolicyParams& params, std::span<const double> cond,
                                     TokenId previous) {
  std::size_t unk = 0;
  auto projected = project_condition(params, cond);
  std::vector<double> h, z;
  hidden_state(params, projected, clamp_token(previous, params.shape().vocab, unk), h);
  logits(params, h, z);
  log_softmax(z);
  for (double& x : z) x = std::exp(x);
  return z;
}

Sample sample(const PolicyParams& params, std::span<const double> cond, const SampleOptions& options,
              std::uint64_t seed) {
  if (options.max_len == 0) fail(ErrorCode::kInvalidArgument, "max_len must be at least 1");
  if (options.temperature < 0) fail(ErrorCode::kInvalidArgument, "temperature must be non-negative");
  std::mt19937_64 rng(seed);
  auto projected = project_condition(params, cond);
  std::size_t V = params.shape().vocab;

  Sample s;
  s.tokens.push_back(kBos);
  std::vector<double> h, z, w(V);
  while (s.tokens.size() <= options.max_len) {
    hidden_state(params, projected, s.tokens.back(), h);
    logits(params, h, z);
    std::vector<double> logp = z;
    log_softmax(logp);

    TokenId next = 0;
    if (options.temperature == 0.0) {
      next = static_cast<TokenId>(std::max_element(z.begin(), z.end()) - z.begin());
    } else {
      double mx = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (std::size_t v = 0; v < V; ++v) total += (w[v] = std::exp((z[v] - mx) / options.temperature));
      double u = uniform01(rng) * total;
      next = static_cast<TokenId>(V - 1);
      double acc = 0.0;
      for (std::size_t v = 0; v < V; ++v) {
        acc += w[v];
        if (u < acc) {
          next = static_cast<TokenId>(v);
          break;
        }
      }
      while (w[next] == 0.0 && next > 0) --next;
    }
    s.tokens.push_back(next);
    s.step_logprob.push_back(logp[next]);
    if (next == kEos) {
      s.finished = true;
      break;
    }
  }
  return s;
}

LossAndGrad weighted_nll_and_grad(const PolicyParams& params, std::span<const double> cond,
                                  std::span<const TokenId> sequence, std::span<const double> weights) {
  if (sequence.empty() || sequence.front() != kBos)
    fail(ErrorCode::kInvalidArgument, "sequence must begin with BOS");
  if (weights.size() + 1 != sequence.size())
    fail(ErrorCode::kInvalidArgument, "reward length " + std::to_string(weights.size()) +
                                          " does not match sequence length " +
                                          std::to_string(sequence.size() - 1));
  const PolicyShape& s = params.shape();
  LossAndGrad out{0.0, PolicyParams(s)};
  PolicyParams& g = out.grad;
  auto projected = project_condition(params, cond);

  std::vector<double> h, z, dh(s.width), dproj(s.width, 0.0);
  std::size_t unk = 0;
  for (std::size_t i = 1; i < sequence.size(); ++i) {
    double w = weights[i - 1];
    if (w == 0.0) continue;
    TokenId prev = clamp_token(sequence[i - 1], s.vocab, unk);
    TokenId cur = clamp_token(sequence[i], s.vocab, unk);
    hidden_state(params, projected, prev, h);
    logits(params, h, z);
    log_softmax(z);
    out.loss -= w * z[cur];

    // dz = w (softmax - onehot)
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t v = 0; v < s.vocab; ++v) {
      double dz = w * (std::exp(z[v]) - (v == cur ? 1.0 : 0.0));
      for (std::size_t e = 0; e < s.width; ++e) {
        g.output_projection(e, v) += h[e] * dz;
        dh[e] += params.output_projection(e, v) * dz;
      }
    }
    for (std::size_t e = 0; e < s.width; ++e) {
      g.embedding(prev, e) += dh[e];
      dproj[e] += dh[e];
    }
  }
  for (std::size_t d = 0; d < s.cond; ++d) {
    double c = cond[d];
    if (c == 0.0) continue;
    for (std::size_t e = 0; e < s.width; ++e) g.cond_projection(d, e) += c * dproj[e];
  }
  return out;
}

LossAndGrad ce_loss_and_grad(const PolicyParams& params, std::span<const double> cond,
                             std::span<const TokenId> reference) {
  std::vector<double> ones(reference.empty() ? 0 : reference.size() - 1, 1.0);
  return weighted_nll_and_grad(params, cond, reference, ones);
}

LossAndGrad rl_loss_and_grad(const PolicyParams& params, std::span<const double> cond,
                             std::span<const TokenId> sampled, std::span<const double> rewards,
                             double baseline) {
  if (sampled.empty() || rewards.size() + 1 != sampled.size())
    fail(ErrorCode::kInvalidArgument, "reward trace length " + std::to_string(rewards.size()) +
                                          " does not match sampled sequence length " +
                                          std::to_string(sampled.empty() ? 0 : sampled.size() - 1));
  std::vector<double> w(rewards.begin(), rewards.end());
  for (double& x : w) x -= baseline;
  return weighted_nll_and_grad(params, cond, sampled, w);
}

std::string serialize_checkpoint(const Checkpoint& c) {
  const auto& s = c.params.shape();
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["seed"] = c.seed;
  j["vocab_hash"] = c.vocab.hash();
  j["shape"] = {{"vocab", s.vocab}, {"width", s.width}, {"cond", s.cond}};
  j["vocabulary"] = c.vocab.tokens();
  j["params"] = std::vector<double>(c.params.data().begin(), c.params.data().end());
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text, const Vocabulary* expected_vocab) {
  Checkpoint c;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != kCheckpointFormat) fail(ErrorCode::kParse, "checkpoint: wrong format tag");
    if (j.value("version", 0) != kCheckpointVersion) fail(ErrorCode::kParse, "checkpoint: unsupported version");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.vocab = Vocabulary::from_tokens(j.at("vocabulary").get<std::vector<std::string>>());
    std::string stored_hash = j.at("vocab_hash").get<std::string>();
    if (stored_hash != c.vocab.hash()) fail(ErrorCode::kParse, "checkpoint: vocabulary hash does not match its tokens");
    if (expected_vocab && expected_vocab->hash() != stored_hash)
      fail(ErrorCode::kInvalidArgument, "checkpoint: vocabulary hash mismatch (checkpoint " + stored_hash +
                                            ", expected " + expected_vocab->hash() + ")");
    PolicyShape shape{j.at("shape").at("vocab").get<std::size_t>(), j.at("shape").at("width").get<std::size_t>(),
                      j.at("shape").at("cond").get<std::size_t>()};
    if (shape.vocab != c.vocab.size()) fail(ErrorCode::kParse, "checkpoint: shape does not match vocabulary");
    c.params = PolicyParams(shape);
    auto values = j.at("params").get<std::vector<double>>();
    if (values.size() != c.params.size()) fail(ErrorCode::kParse, "checkpoint: parameter count mismatch");
    std::copy(values.begin(), values.end(), c.params.data().begin());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary* expected_vocab) {
  return parse_checkpoint(io::read_file(path), expected_vocab);
}

}  // namespace kerm
