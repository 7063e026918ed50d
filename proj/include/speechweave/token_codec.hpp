// include/speechweave/token_codec.hpp

// Copyright 2026  The speechweave Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Run-length coding of discrete speech tokens. Consecutive repeats are merged
// before the tokens reach a language model and restored (from the stored
// counts or from a duration predictor) before synthesis. The coding is
// lossless: counts are never clamped here.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "speechweave/error.hpp"

namespace speechweave {

using TokenId = std::uint32_t;
using RunCount = std::uint64_t;

inline constexpr std::uint32_t kDefaultSpeechVocab = 4096;
inline constexpr double kDefaultFrameRateHz = 25.0;

struct SpeechTokenSequence {
  std::vector<TokenId> tokens;
  std::uint32_t vocab_size = kDefaultSpeechVocab;
  double frame_rate_hz = kDefaultFrameRateHz;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const SpeechTokenSequence&) const = default;
};

struct TokenRun {
  TokenId token = 0;
  RunCount count = 1;
  bool operator==(const TokenRun&) const = default;
};

struct MergedTokenSequence {
  std::vector<TokenRun> runs;
  std::uint32_t vocab_size = kDefaultSpeechVocab;
  double frame_rate_hz = kDefaultFrameRateHz;

  std::vector<TokenId> tokens() const {
    std::vector<TokenId> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back(r.token);
    return out;
  }
  std::vector<RunCount> counts() const {
    std::vector<RunCount> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back(r.count);
    return out;
  }
  // Length of the expanded sequence.
  RunCount expanded_size() const noexcept {
    RunCount n = 0;
    for (const auto& r : runs) n += r.count;
    return n;
  }
  bool operator==(const MergedTokenSequence&) const = default;
};

inline void check_tokens(std::span<const TokenId> tokens, std::uint32_t vocab_size) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= vocab_size) {
      throw InvalidTokenError(i, "token id " + std::to_string(tokens[i]) + " at index " +
                                     std::to_string(i) + " is outside vocab of size " +
                                     std::to_string(vocab_size));
    }
  }
}

inline MergedTokenSequence merge_runs(const SpeechTokenSequence& seq) {
  check_tokens(seq.tokens, seq.vocab_size);
  MergedTokenSequence merged;
  merged.vocab_size = seq.vocab_size;
  merged.frame_rate_hz = seq.frame_rate_hz;
  for (TokenId t : seq.tokens) {
    if (!merged.runs.empty() && merged.runs.back().token == t) {
      ++merged.runs.back().count;
    } else {
      merged.runs.push_back({t, 1});
    }
  }
  return merged;
}

inline SpeechTokenSequence expand_runs(const MergedTokenSequence& merged) {
  SpeechTokenSequence seq;
  seq.vocab_size = merged.vocab_size;
  seq.frame_rate_hz = merged.frame_rate_hz;
  for (std::size_t i = 0; i < merged.runs.size(); ++i) {
    if (merged.runs[i].count == 0) {
      throw InvalidCountError("run " + std::to_string(i) + " has count 0");
    }
  }
  seq.tokens.reserve(merged.expanded_size());
  for (const auto& r : merged.runs) seq.tokens.insert(seq.tokens.end(), r.count, r.token);
  return seq;
}

// Applies per-token repeat counts, typically predicted by a duration model.
// Adjacent equal tokens are allowed here; they simply concatenate.
inline SpeechTokenSequence expand_with_counts(std::span<const TokenId> tokens,
                                              std::span<const RunCount> counts,
                                              std::uint32_t vocab_size = kDefaultSpeechVocab) {
  if (tokens.size() != counts.size()) {
    throw ShapeError("expand_with_counts: " + std::to_string(tokens.size()) + " tokens but " +
                     std::to_string(counts.size()) + " counts");
  }
  check_tokens(tokens, vocab_size);
  SpeechTokenSequence seq;
  seq.vocab_size = vocab_size;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (counts[i] == 0) throw InvalidCountError("count at index " + std::to_string(i) + " is 0");
    seq.tokens.insert(seq.tokens.end(), counts[i], tokens[i]);
  }
  return seq;
}

}  // namespace speechweave
