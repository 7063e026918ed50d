// include/speechweave/ctc_align.hpp

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

// CTC forced alignment.
//
// Given per-frame log-probabilities over a label vocabulary (blank included)
// and a reference label sequence y, find the frame path with the largest
// summed log-probability among all paths that collapse to y, then read off
// the frame span of every label occurrence.
//
// The search runs over the usual 2L+1 state topology
//   blank, y_1, blank, y_2, ..., y_L, blank
// with transitions stay / advance by one / advance by two (the last only onto
// a label that differs from the one it skips past). Every path in that
// topology collapses to y and every path that collapses to y has exactly one
// state sequence in it, so this is the same search as enumerating all label
// paths and filtering by the collapse.
//
// Ties. Among equally scored paths we return the one whose state sequence is
// lexicographically largest, i.e. the one that advances earliest. The
// exhaustive oracle below applies the same rule so both return identical
// paths.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "speechweave/error.hpp"

namespace speechweave {

using Label = std::int32_t;
using LabelSequence = std::vector<Label>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// T x V row-major log-probabilities.
class EmissionMatrix {
 public:
  static constexpr double kDefaultRowTolerance = 1e-6;

  EmissionMatrix(std::size_t frames, std::size_t vocab, Label blank, std::vector<double> log_probs,
                 double row_tolerance = kDefaultRowTolerance)
      : frames_(frames), vocab_(vocab), blank_(blank), log_probs_(std::move(log_probs)) {
    if (frames_ == 0) throw ShapeError("emission matrix needs at least one frame");
    if (vocab_ < 2) throw ShapeError("emission vocab must hold blank plus at least one label");
    if (log_probs_.size() != frames_ * vocab_) {
      throw ShapeError("emission data has " + std::to_string(log_probs_.size()) +
                       " values, expected " + std::to_string(frames_ * vocab_));
    }
    if (blank_ < 0 || static_cast<std::size_t>(blank_) >= vocab_) {
      throw InvalidLabelError("blank index " + std::to_string(blank_) + " outside vocab");
    }
    for (std::size_t t = 0; t < frames_; ++t) {
      for (double v : row(t)) {
        if (std::isnan(v) || v > row_tolerance) {
          throw ShapeError("frame " + std::to_string(t) + " holds an invalid log-probability");
        }
      }
      const double lse = log_sum_exp(row(t));
      if (!(std::abs(lse) <= row_tolerance)) {
        throw ShapeError("frame " + std::to_string(t) + " is not normalized (log-sum-exp " +
                         std::to_string(lse) + ")");
      }
    }
  }

  // Builds from linear probabilities; rows are renormalized first.
  static EmissionMatrix from_probabilities(const std::vector<std::vector<double>>& probs,
                                           Label blank) {
    if (probs.empty()) throw ShapeError("emission matrix needs at least one frame");
    const std::size_t vocab = probs.front().size();
    std::vector<double> lp;
    lp.reserve(probs.size() * vocab);
    for (const auto& row : probs) {
      if (row.size() != vocab) throw ShapeError("ragged probability rows");
      double z = 0.0;
      for (double p : row) z += p;
      for (double p : row) lp.push_back(p > 0.0 ? std::log(p / z) : kNegInf);
    }
    return EmissionMatrix(probs.size(), vocab, blank, std::move(lp));
  }

  std::size_t frames() const noexcept { return frames_; }
  std::size_t vocab() const noexcept { return vocab_; }
  Label blank() const noexcept { return blank_; }
  double at(std::size_t t, Label v) const noexcept {
    return log_probs_[t * vocab_ + static_cast<std::size_t>(v)];
  }
  std::span<const double> row(std::size_t t) const noexcept {
    return {log_probs_.data() + t * vocab_, vocab_};
  }
  const std::vector<double>& data() const noexcept { return log_probs_; }

 private:
  std::size_t frames_;
  std::size_t vocab_;
  Label blank_;
  std::vector<double> log_probs_;
};

struct AlignmentPath {
  std::vector<Label> path;
  double score = kNegInf;
};

// Inclusive frame (or token) range.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const noexcept { return end - start + 1; }
  bool operator==(const Span&) const = default;
};

struct TokenBoundaries {
  std::vector<Span> spans;
  bool operator==(const TokenBoundaries&) const = default;
};

inline void validate_labels(const LabelSequence& y, Label blank, std::size_t vocab) {
  if (y.empty()) throw InvalidLabelError("label sequence is empty");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == blank) {
      throw InvalidLabelError("label " + std::to_string(i) + " equals the blank index");
    }
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= vocab) {
      throw InvalidLabelError("label " + std::to_string(i) + " (" + std::to_string(y[i]) +
                              ") outside emission vocab");
    }
  }
}

// (blank, y1, blank, y2, ..., yL, blank)
inline std::vector<Label> expand_labels(const LabelSequence& y, Label blank) {
  if (y.empty()) throw InvalidLabelError("label sequence is empty");
  std::vector<Label> states;
  states.reserve(2 * y.size() + 1);
  states.push_back(blank);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == blank) {
      throw InvalidLabelError("label " + std::to_string(i) + " equals the blank index");
    }
    states.push_back(y[i]);
    states.push_back(blank);
  }
  return states;
}

// L plus one separating blank per pair of equal neighbours.
inline std::size_t min_frames_required(const LabelSequence& y) {
  std::size_t n = y.size();
  for (std::size_t i = 1; i < y.size(); ++i) {
    if (y[i] == y[i - 1]) ++n;
  }
  return n;
}

inline double path_score(const EmissionMatrix& em, std::span<const Label> path) {
  double s = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) s += em.at(t, path[t]);
  return s;
}

// Deduplicate adjacent repeats, then drop blanks.
inline LabelSequence collapse(std::span<const Label> path, Label blank) {
  LabelSequence out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0 && path[t] == path[t - 1]) continue;
    if (path[t] != blank) out.push_back(path[t]);
  }
  return out;
}

namespace detail {

inline void check_feasible(const EmissionMatrix& em, const LabelSequence& y) {
  const std::size_t need = min_frames_required(y);
  if (em.frames() < need) {
    throw InfeasibleAlignmentError(need, "alignment needs at least " + std::to_string(need) +
                                             " frames, emission has " +
                                             std::to_string(em.frames()));
  }
}

}  // namespace detail

inline AlignmentPath force_align(const EmissionMatrix& em, const LabelSequence& y) {
  validate_labels(y, em.blank(), em.vocab());
  detail::check_feasible(em, y);

  const std::vector<Label> states = expand_labels(y, em.blank());
  const std::size_t T = em.frames();
  const std::size_t S = states.size();
  auto can_skip = [&](std::size_t to) {
    return to >= 2 && to % 2 == 1 && states[to] != states[to - 2];
  };

  // best[t*S+s]: best score of frames t..T-1 when frame t sits in state s.
  std::vector<double> best(T * S, kNegInf);
  std::vector<char> live(T * S, 0);
  for (std::size_t s = S - 2; s < S; ++s) {
    live[(T - 1) * S + s] = 1;
    best[(T - 1) * S + s] = em.at(T - 1, states[s]);
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      bool any = false;
      double m = kNegInf;
      for (std::size_t step = 0; step <= 2; ++step) {
        const std::size_t to = s + step;
        if (to >= S) break;
        if (step == 2 && !can_skip(to)) continue;
        if (!live[(t + 1) * S + to]) continue;
        if (!any || best[(t + 1) * S + to] > m) m = best[(t + 1) * S + to];
        any = true;
      }
      if (any) {
        live[t * S + s] = 1;
        best[t * S + s] = em.at(t, states[s]) + m;
      }
    }
  }

  // Forward trace: among the optimal successors take the highest state.
  auto pick = [&](std::size_t t, std::size_t lo, std::size_t hi, bool allow_skip_hi) {
    std::size_t chosen = S;
    for (std::size_t to = hi + 1; to-- > lo;) {
      if (to >= S) continue;
      if (to == hi && hi - lo == 2 && !allow_skip_hi) continue;
      if (!live[t * S + to]) continue;
      if (chosen == S || best[t * S + to] > best[t * S + chosen]) chosen = to;
    }
    return chosen;
  };

  AlignmentPath out;
  out.path.resize(T);
  std::size_t s = pick(0, 0, 1, true);
  out.path[0] = states[s];
  for (std::size_t t = 1; t < T; ++t) {
    s = pick(t, s, s + 2, s + 2 < S && can_skip(s + 2));
    out.path[t] = states[s];
  }
  out.score = path_score(em, out.path);
  return out;
}

// Position in the 2L+1 topology of every frame of a path that collapses to
// its labels. Used to apply the shared tie-break outside the DP.
inline std::vector<std::size_t> path_states(std::span<const Label> path, Label blank) {
  std::vector<std::size_t> out(path.size());
  std::size_t occurrences = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank) {
      out[t] = 2 * occurrences;
    } else {
      if (t == 0 || path[t - 1] != path[t]) ++occurrences;
      out[t] = 2 * occurrences - 1;
    }
  }
  return out;
}

inline constexpr std::size_t kDefaultBruteForceFrameCap = 10;

// Exhaustive oracle for force_align: tries every one of V^T label paths.
inline AlignmentPath brute_force_align(const EmissionMatrix& em, const LabelSequence& y,
                                       std::size_t frame_cap = kDefaultBruteForceFrameCap) {
  validate_labels(y, em.blank(), em.vocab());
  const std::size_t T = em.frames();
  const std::size_t V = em.vocab();
  if (T > frame_cap) {
    throw EnumerationCapError("brute force refuses " + std::to_string(T) +
                              " frames (cap " + std::to_string(frame_cap) + ")");
  }
  double total = std::pow(static_cast<double>(V), static_cast<double>(T));
  if (total > 1e9) throw EnumerationCapError("brute force enumeration too large");

  std::vector<Label> cur(T, 0);
  bool found = false;
  AlignmentPath best;
  std::vector<std::size_t> best_states;
  while (true) {
    if (collapse(cur, em.blank()) == y) {
      const double sc = path_score(em, cur);
      std::vector<std::size_t> st = path_states(cur, em.blank());
      if (!found || sc > best.score || (sc == best.score && st > best_states)) {
        best.path = cur;
        best.score = sc;
        best_states = std::move(st);
        found = true;
      }
    }
    std::size_t i = 0;
    while (i < T && static_cast<std::size_t>(++cur[i]) == V) {
      cur[i] = 0;
      ++i;
    }
    if (i == T) break;
  }
  if (!found) {
    const std::size_t need = min_frames_required(y);
    throw InfeasibleAlignmentError(need, "no path of " + std::to_string(T) +
                                             " frames collapses to the labels (needs " +
                                             std::to_string(need) + ")");
  }
  return best;
}

// Frame span of every label occurrence along the path. A label that appears
// twice in y gets two spans, one per contiguous block.
inline TokenBoundaries token_boundaries(std::span<const Label> path, const LabelSequence& y,
                                        Label blank) {
  if (collapse(path, blank) != y) {
    throw PreconditionError("path does not collapse to the label sequence");
  }
  TokenBoundaries b;
  b.spans.reserve(y.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == blank) continue;
    if (t > 0 && path[t - 1] == path[t]) {
      b.spans.back().end = t;
    } else {
      b.spans.push_back({t, t});
    }
  }
  return b;
}

inline TokenBoundaries token_boundaries(const AlignmentPath& p, const LabelSequence& y,
                                        Label blank) {
  return token_boundaries(std::span<const Label>(p.path), y, blank);
}

// Rescales frame spans onto a token grid of a different rate. Frame t covers
// tokens [floor(t*Nt/Nf), floor((t+1)*Nt/Nf) - 1]; a span starts at the first
// token of its first frame and ends at the last token of its last frame, so
// the final frame reaches token Nt-1. When downsampling collapses spans onto
// the same token they are pushed apart to stay ordered and disjoint.
inline TokenBoundaries map_frames_to_token_indices(const TokenBoundaries& b,
                                                   std::size_t t_frames, std::size_t t_tokens) {
  if (t_frames == 0 || t_tokens == 0) throw PreconditionError("frame and token counts must be >= 1");
  if (b.spans.size() > t_tokens) {
    throw PreconditionError(std::to_string(b.spans.size()) + " spans cannot fit in " +
                            std::to_string(t_tokens) + " tokens");
  }
  const auto nf = static_cast<std::uint64_t>(t_frames);
  const auto nt = static_cast<std::uint64_t>(t_tokens);
  TokenBoundaries out;
  out.spans.reserve(b.spans.size());
  std::size_t prev_end = 0;
  for (std::size_t l = 0; l < b.spans.size(); ++l) {
    const Span& s = b.spans[l];
    if (s.start > s.end || s.end >= t_frames || (l > 0 && s.start <= b.spans[l - 1].end)) {
      throw PreconditionError("input span " + std::to_string(l) + " is invalid");
    }
    std::size_t start = static_cast<std::size_t>(s.start * nt / nf);
    std::size_t stop = static_cast<std::size_t>((s.end + 1) * nt / nf);
    std::size_t end = stop > 0 ? stop - 1 : 0;
    if (l > 0 && start <= prev_end) start = prev_end + 1;
    if (end < start) end = start;
    out.spans.push_back({start, end});
    prev_end = end;
  }
  // Forward clamping can run past the grid; pull back from the right.
  std::size_t limit = t_tokens - 1;
  for (std::size_t l = out.spans.size(); l-- > 0;) {
    Span& s = out.spans[l];
    if (s.end > limit) s.end = limit;
    if (s.start > s.end) s.start = s.end;
    limit = s.start > 0 ? s.start - 1 : 0;
  }
  return out;
}

}  // namespace speechweave
