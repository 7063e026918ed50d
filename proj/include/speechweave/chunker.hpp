// include/speechweave/chunker.hpp

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

// Splits a response into chunks for interleaved generation and attaches a
// speech-token span to each chunk.
//
// Rule: cut right after a punctuation mark, but only once the current chunk
// holds at least min_words words. The last chunk may be shorter.
//
// Words are whitespace-delimited tokens for English. For Chinese every Han
// character is its own word and any other run of non-space, non-punctuation
// characters counts as one word. Tokens made only of punctuation are not
// words; they ride along with the surrounding chunk.

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "speechweave/ctc_align.hpp"
#include "speechweave/error.hpp"
#include "speechweave/utf8.hpp"

namespace speechweave {

enum class Language { en, zh, other };

inline std::string to_string(Language l) {
  switch (l) {
    case Language::en: return "en";
    case Language::zh: return "zh";
    case Language::other: return "other";
  }
  return "other";
}

inline Language language_from_string(std::string_view s) {
  if (s == "en") return Language::en;
  if (s == "zh") return Language::zh;
  if (s == "other") return Language::other;
  throw ConfigError("unknown language '" + std::string(s) + "'");
}

inline std::set<char32_t> default_punctuation() {
  return {U'.', U',', U';', U':', U'!', U'?', U'…', U'。',
          U'，', U'；', U'：', U'！', U'？'};
}

struct ChunkingConfig {
  std::size_t min_words = 7;
  std::set<char32_t> punctuation = default_punctuation();
  Language language = Language::en;

  void validate() const {
    if (min_words < 1) throw ConfigError("min_words must be >= 1");
    if (punctuation.empty()) throw ConfigError("punctuation set must not be empty");
  }
};

struct WordSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t count() const noexcept { return last - first + 1; }
  bool operator==(const WordSpan&) const = default;
};

struct TextChunk {
  // Whitespace preceding the chunk in the source text.
  std::string leading;
  // Chunk body: starts at a non-space character, ends at the cut.
  std::string text;
  // Whitespace after the last chunk; empty elsewhere.
  std::string trailing;
  WordSpan words;
  std::optional<Span> tokens;

  bool operator==(const TextChunk&) const = default;
};

// leading + text + trailing over all chunks.
inline std::string reconstruct_text(const std::vector<TextChunk>& chunks) {
  std::string s;
  for (const auto& c : chunks) {
    s += c.leading;
    s += c.text;
    s += c.trailing;
  }
  return s;
}

namespace detail {

// Byte ranges of each word, in order.
struct WordToken {
  std::size_t begin;
  std::size_t end;
};

inline bool is_word_char(char32_t c, const ChunkingConfig& cfg) {
  return !utf8::is_space(c) && !cfg.punctuation.contains(c);
}

inline std::vector<WordToken> find_words(const std::vector<utf8::CodePoint>& cps,
                                         const ChunkingConfig& cfg) {
  std::vector<WordToken> words;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (utf8::is_space(cps[i].value)) {
      ++i;
      continue;
    }
    if (cfg.language == Language::zh) {
      if (utf8::is_han(cps[i].value)) {
        words.push_back({i, i + 1});
        ++i;
        continue;
      }
      if (!is_word_char(cps[i].value, cfg)) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < cps.size() && is_word_char(cps[j].value, cfg) && !utf8::is_han(cps[j].value)) ++j;
      words.push_back({i, j});
      i = j;
      continue;
    }
    // Whitespace token; a word only if it has a non-punctuation character.
    std::size_t j = i;
    bool wordy = false;
    while (j < cps.size() && !utf8::is_space(cps[j].value)) {
      wordy = wordy || is_word_char(cps[j].value, cfg);
      ++j;
    }
    if (wordy) words.push_back({i, j});
    i = j;
  }
  return words;
}

}  // namespace detail

// Number of words the chunker sees in `text`.
inline std::size_t count_words(std::string_view text, const ChunkingConfig& cfg) {
  return detail::find_words(utf8::decode(text), cfg).size();
}

inline std::vector<TextChunk> segment_text(std::string_view text, const ChunkingConfig& cfg) {
  cfg.validate();
  const auto cps = utf8::decode(text);
  const auto words = detail::find_words(cps, cfg);
  if (words.empty()) throw EmptyInputError("text has no words to chunk");

  auto byte_at = [&](std::size_t cp_index) {
    return cp_index < cps.size() ? cps[cp_index].offset : text.size();
  };
  // A cut after a punctuation mark at cp index i is a word boundary when the
  // next character is whitespace, or starts a new word right away (Han text,
  // full-width marks).
  auto cut_allowed = [&](std::size_t i) {
    const char32_t c = cps[i].value;
    if (!cfg.punctuation.contains(c)) return false;
    if (i + 1 >= cps.size()) return false;
    const char32_t n = cps[i + 1].value;
    if (utf8::is_space(n)) return true;
    if (cfg.punctuation.contains(n)) return false;
    return c >= 0x80 || utf8::is_han(n);
  };

  // Cut positions in code points (exclusive end of a chunk body).
  std::vector<std::size_t> cuts;
  std::vector<std::size_t> cut_word_count;  // words before each cut
  std::size_t w = 0;          // next word index
  std::size_t chunk_first = 0;  // first word of the open chunk
  for (std::size_t i = 0; i < cps.size(); ++i) {
    while (w < words.size() && words[w].end <= i) ++w;
    // Words that end at or before i + 1 are inside the chunk if we cut here.
    std::size_t done = w;
    while (done < words.size() && words[done].end <= i + 1) ++done;
    if (done - chunk_first >= cfg.min_words && cut_allowed(i) && done < words.size()) {
      cuts.push_back(i + 1);
      cut_word_count.push_back(done);
      chunk_first = done;
    }
  }

  std::vector<TextChunk> chunks;
  std::size_t pos = 0;  // cp index where the next chunk (with leading space) begins
  std::size_t first_word = 0;
  auto emit = [&](std::size_t body_end_cp, std::size_t word_end) {
    std::size_t b = pos;
    while (b < body_end_cp && utf8::is_space(cps[b].value)) ++b;
    TextChunk c;
    c.leading = std::string(text.substr(byte_at(pos), byte_at(b) - byte_at(pos)));
    c.text = std::string(text.substr(byte_at(b), byte_at(body_end_cp) - byte_at(b)));
    c.words = {first_word, word_end - 1};
    chunks.push_back(std::move(c));
    pos = body_end_cp;
    first_word = word_end;
  };
  for (std::size_t k = 0; k < cuts.size(); ++k) emit(cuts[k], cut_word_count[k]);

  // Final chunk: body runs to the last non-space character.
  std::size_t end = cps.size();
  while (end > pos && utf8::is_space(cps[end - 1].value)) --end;
  emit(end, words.size());
  chunks.back().trailing = std::string(text.substr(byte_at(end)));
  return chunks;
}

// Attaches token spans. `word_spans` holds one token-space span per word, in
// word order. Chunk spans run from the first word's start to the last word's
// end; the silence between chunks is split at the midpoint with the odd token
// going left, and the ends are stretched to 0 and t_tokens-1 so the spans
// partition the token range.
inline std::vector<TextChunk> assign_speech_spans(std::vector<TextChunk> chunks,
                                                  const TokenBoundaries& word_spans,
                                                  std::size_t t_tokens) {
  if (chunks.empty()) throw ShapeError("no chunks to assign");
  const std::size_t n_words = chunks.back().words.last + 1;
  if (word_spans.spans.size() != n_words) {
    throw ShapeError("chunks cover " + std::to_string(n_words) + " words but " +
                     std::to_string(word_spans.spans.size()) + " word spans were given");
  }
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const std::size_t expect_first = i == 0 ? 0 : chunks[i - 1].words.last + 1;
    if (chunks[i].words.first != expect_first || chunks[i].words.last < chunks[i].words.first) {
      throw ShapeError("chunks do not partition the word indices");
    }
  }
  for (std::size_t w = 0; w < word_spans.spans.size(); ++w) {
    const Span& s = word_spans.spans[w];
    if (s.start > s.end || s.end >= t_tokens ||
        (w > 0 && s.start <= word_spans.spans[w - 1].end)) {
      throw PreconditionError("word span " + std::to_string(w) + " is not ordered within range");
    }
  }
  std::vector<Span> raw;
  raw.reserve(chunks.size());
  for (const auto& c : chunks) {
    raw.push_back({word_spans.spans[c.words.first].start, word_spans.spans[c.words.last].end});
  }
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    Span s = raw[i];
    s.start = i == 0 ? 0 : chunks[i - 1].tokens->end + 1;
    if (i + 1 == chunks.size()) {
      s.end = t_tokens - 1;
    } else {
      const std::size_t gap = raw[i + 1].start - raw[i].end - 1;
      s.end = raw[i].end + (gap + 1) / 2;
    }
    chunks[i].tokens = s;
  }
  return chunks;
}

}  // namespace speechweave
