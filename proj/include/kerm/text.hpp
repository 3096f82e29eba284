#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kerm {

// Trim both ends and collapse internal whitespace runs to one space.
std::string collapse_whitespace(std::string_view text);

// ASCII lowercase. Non-ASCII bytes pass through unchanged.
std::string casefold(std::string_view text);

// Remove trailing '.', '!', '?', ';', ':', ',' (and whitespace between them).
std::string strip_terminal_punctuation(std::string_view text);

// Dedup key for sentences: casefold + collapse whitespace + strip terminal
// punctuation.
std::string normalize_sentence(std::string_view text);

// Splits on '.', '!' or '?' followed by whitespace or end of input. Returned
// pieces keep their terminator and are whitespace-collapsed; pieces that
// normalize to the empty string are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// Shared word tokenizer: lowercase, split on whitespace, strip leading and
// trailing non-alphanumeric characters, drop empties. Used by the embedder,
// the labeler, the offline judge and all text metrics.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::string hex64(std::uint64_t value);

}  // namespace kerm

namespace kerm {

// Independent stream seed for a named stage, so adding a stage never shifts
// the streams of the others.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

}  // namespace kerm
