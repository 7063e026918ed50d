// include/speechweave/eval_metrics.hpp

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

// Automatic metrics for spoken responses: word/character error rate,
// off-target language ratio and speech-text representation similarity.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "speechweave/chunker.hpp"
#include "speechweave/error.hpp"
#include "speechweave/seed.hpp"
#include "speechweave/utf8.hpp"

namespace speechweave {

enum class ErrorUnit { word, character };

inline const char* to_string(ErrorUnit u) { return u == ErrorUnit::word ? "word" : "character"; }

struct NormalizationConfig {
  bool enabled = true;
  std::set<char32_t> punctuation = default_punctuation();
};

// Lowercases ASCII letters, removes punctuation marks and collapses runs of
// whitespace to one space (trimmed at both ends).
inline std::string normalize_text(std::string_view s, const NormalizationConfig& cfg = {}) {
  if (!cfg.enabled) return std::string(s);
  std::string out;
  bool pending_space = false;
  for (const auto& cp : utf8::decode(s)) {
    char32_t c = cp.value;
    if (cfg.punctuation.contains(c)) continue;
    if (utf8::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    utf8::append(out, c);
  }
  return out;
}

// Comparison units: whitespace-separated words, or characters with spaces
// dropped and combining marks kept on their base character.
inline std::vector<std::string> split_units(std::string_view s, ErrorUnit unit) {
  std::vector<std::string> out;
  const auto cps = utf8::decode(s);
  if (unit == ErrorUnit::word) {
    std::string cur;
    for (const auto& cp : cps) {
      if (utf8::is_space(cp.value)) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.append(s.substr(cp.offset, cp.length));
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }
  for (const auto& cp : cps) {
    if (utf8::is_space(cp.value)) continue;
    if (utf8::is_combining_mark(cp.value) && !out.empty()) {
      out.back().append(s.substr(cp.offset, cp.length));
    } else {
      out.emplace_back(s.substr(cp.offset, cp.length));
    }
  }
  return out;
}

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t distance() const noexcept { return substitutions + insertions + deletions; }
  bool operator==(const EditCounts&) const = default;
};

// Minimal Levenshtein edit script. Among scripts of minimal length the one
// with the fewest insertions plus deletions is reported, which pins S, I and
// D uniquely and makes swapping the inputs swap I and D.
template <typename T>
EditCounts edit_counts(const std::vector<T>& ref, const std::vector<T>& hyp) {
  using Cost = std::pair<std::size_t, std::size_t>;  // (edits, indels)
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cost> dp((n + 1) * (m + 1));
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i) dp[at(i, 0)] = {i, i};
  for (std::size_t j = 0; j <= m; ++j) dp[at(0, j)] = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const Cost diag = dp[at(i - 1, j - 1)];
      Cost best{diag.first + (ref[i - 1] == hyp[j - 1] ? 0 : 1), diag.second};
      const Cost del{dp[at(i - 1, j)].first + 1, dp[at(i - 1, j)].second + 1};
      const Cost ins{dp[at(i, j - 1)].first + 1, dp[at(i, j - 1)].second + 1};
      best = std::min({best, del, ins});
      dp[at(i, j)] = best;
    }
  }
  EditCounts e;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const Cost cur = dp[at(i, j)];
    if (i > 0 && j > 0) {
      const Cost diag = dp[at(i - 1, j - 1)];
      const bool same = ref[i - 1] == hyp[j - 1];
      if (Cost{diag.first + (same ? 0 : 1), diag.second} == cur) {
        if (!same) ++e.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && Cost{dp[at(i - 1, j)].first + 1, dp[at(i - 1, j)].second + 1} == cur) {
      ++e.deletions;
      --i;
    } else {
      ++e.insertions;
      --j;
    }
  }
  return e;
}

struct ErrorRateReport {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t reference_length = 0;
  double rate = 0.0;
  ErrorUnit unit = ErrorUnit::word;
};

inline ErrorRateReport edit_distance_rate(std::string_view reference, std::string_view hypothesis,
                                          ErrorUnit unit,
                                          const NormalizationConfig& norm = {}) {
  const auto ref = split_units(normalize_text(reference, norm), unit);
  const auto hyp = split_units(normalize_text(hypothesis, norm), unit);
  if (ref.empty()) throw UndefinedMetricError("error rate undefined for an empty reference");
  const EditCounts e = edit_counts(ref, hyp);
  ErrorRateReport r;
  r.substitutions = e.substitutions;
  r.insertions = e.insertions;
  r.deletions = e.deletions;
  r.reference_length = ref.size();
  r.rate = static_cast<double>(e.distance()) / static_cast<double>(ref.size());
  r.unit = unit;
  return r;
}

// Corpus-level rate: summed edits over summed reference lengths.
inline ErrorRateReport accumulate(const std::vector<ErrorRateReport>& parts, ErrorUnit unit) {
  ErrorRateReport r;
  r.unit = unit;
  for (const auto& p : parts) {
    r.substitutions += p.substitutions;
    r.insertions += p.insertions;
    r.deletions += p.deletions;
    r.reference_length += p.reference_length;
  }
  if (r.reference_length == 0) throw UndefinedMetricError("no reference units");
  r.rate = static_cast<double>(r.substitutions + r.insertions + r.deletions) /
           static_cast<double>(r.reference_length);
  return r;
}

namespace detail {

inline bool is_punctuation_or_symbol(char32_t c) {
  if (c < 0x80) return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
                       (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  return (c >= 0x2000 && c <= 0x206F) || (c >= 0x3000 && c <= 0x303F) ||
         (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) ||
         (c >= 0xFF3B && c <= 0xFF40) || (c >= 0xFF5B && c <= 0xFF65) ||
         default_punctuation().contains(c);
}

}  // namespace detail

struct ScriptProfile {
  std::size_t scored = 0;  // non-space, non-punctuation characters
  std::size_t han = 0;
  std::size_t latin = 0;
};

inline ScriptProfile script_profile(std::string_view text) {
  ScriptProfile p;
  for (const auto& cp : utf8::decode(text)) {
    if (utf8::is_space(cp.value) || detail::is_punctuation_or_symbol(cp.value)) continue;
    ++p.scored;
    if (utf8::is_han(cp.value)) ++p.han;
    if (utf8::is_latin_letter(cp.value)) ++p.latin;
  }
  return p;
}

inline constexpr double kScriptThreshold = 0.3;

// Dominant-script heuristic. Stand-in for an external language identifier.
inline Language detect_language(std::string_view text) {
  const ScriptProfile p = script_profile(text);
  if (p.scored == 0) return Language::other;
  const double han = static_cast<double>(p.han) / static_cast<double>(p.scored);
  const double latin = static_cast<double>(p.latin) / static_cast<double>(p.scored);
  if (han > kScriptThreshold) return Language::zh;
  if (latin > kScriptThreshold) return Language::en;
  return Language::other;
}

using LanguageDetector = std::function<Language(std::string_view)>;

struct OffTargetReport {
  std::size_t total = 0;
  std::size_t off_target = 0;
  double ratio = 0.0;            // percent
  double on_target_ratio = 100.0;  // percent, 100 - ratio
};

inline OffTargetReport off_target_ratio(const std::vector<std::string>& responses,
                                        Language intended,
                                        const LanguageDetector& detector = detect_language) {
  if (responses.empty()) throw EmptyInputError("off-target ratio needs at least one response");
  OffTargetReport r;
  r.total = responses.size();
  for (const auto& s : responses) r.off_target += detector(s) != intended;
  r.ratio = 100.0 * static_cast<double>(r.off_target) / static_cast<double>(r.total);
  r.on_target_ratio = 100.0 - r.ratio;
  return r;
}

enum class Pairing { parallel, random };

struct SimilarityReport {
  Pairing pairing = Pairing::parallel;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t pairs = 0;
};

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("vectors differ in dimension");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw UndefinedMetricError("cosine undefined for a zero vector");
  // sqrt(na * nb) equals na exactly when a == b, so self-similarity is 1.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

// Seeded random cyclic permutation (Sattolo); no index maps to itself.
inline std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i - 1));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

inline SimilarityReport representation_similarity(const std::vector<std::vector<double>>& a,
                                                   const std::vector<std::vector<double>>& b,
                                                   Pairing pairing, std::uint64_t seed = 0) {
  if (a.size() != b.size()) {
    throw ShapeError("vector lists differ in length (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ShapeError("vector lists are empty");
  if (pairing == Pairing::random && a.size() < 2) {
    throw ShapeError("random pairing needs at least two pairs");
  }
  const std::size_t dim = a.front().size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != dim || b[i].size() != dim) throw ShapeError("vectors differ in dimension");
  }
  std::vector<std::size_t> partner(a.size());
  if (pairing == Pairing::parallel) {
    std::iota(partner.begin(), partner.end(), std::size_t{0});
  } else {
    partner = random_derangement(a.size(), seed);
  }
  SimilarityReport r;
  r.pairing = pairing;
  r.pairs = a.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double c = cosine_similarity(a[i], b[partner[i]]);
    sum += c;
    r.min = i == 0 ? c : std::min(r.min, c);
    r.max = i == 0 ? c : std::max(r.max, c);
  }
  r.mean = sum / static_cast<double>(a.size());
  return r;
}

}  // namespace speechweave
