// tests/test_ctc_align.cpp

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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "speechweave/ctc_align.hpp"

namespace sw = speechweave;
using sw::EmissionMatrix;
using sw::Label;
using sw::LabelSequence;
using sw::Span;

namespace {

constexpr Label kBlank = 0;

EmissionMatrix random_emissions(std::mt19937_64& rng, std::size_t T, std::size_t V) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<std::vector<double>> p(T, std::vector<double>(V));
  for (auto& row : p) {
    for (auto& x : row) x = u(rng);
  }
  return EmissionMatrix::from_probabilities(p, kBlank);
}

EmissionMatrix uniform_emissions(std::size_t T, std::size_t V) {
  return EmissionMatrix(T, V, kBlank, std::vector<double>(T * V, std::log(1.0 / static_cast<double>(V))));
}

// Test-side collapse: drop repeats, then blanks.
LabelSequence ref_collapse(const std::vector<Label>& p) {
  LabelSequence out;
  Label prev = -1;
  for (Label x : p) {
    if (x != prev && x != kBlank) out.push_back(x);
    prev = x;
  }
  return out;
}

// Position of each frame in the blank-label-blank state chain.
std::vector<std::size_t> ref_states(const std::vector<Label>& p) {
  std::vector<std::size_t> st;
  std::size_t emitted = 0;
  Label prev = -1;
  for (Label x : p) {
    if (x == kBlank) {
      st.push_back(2 * emitted);
    } else {
      if (x != prev) ++emitted;
      st.push_back(2 * emitted - 1);
    }
    prev = x;
  }
  return st;
}

struct Enumerated {
  bool found = false;
  std::vector<Label> path;
  double score = 0.0;
  std::size_t valid_paths = 0;
};

// Independent exhaustive oracle: best-scoring path, ties to the
// lexicographically largest state chain (earliest advance).
Enumerated enumerate(const EmissionMatrix& em, const LabelSequence& y) {
  const std::size_t T = em.frames(), V = em.vocab();
  Enumerated best;
  std::vector<std::size_t> best_states;
  std::vector<Label> cur(T, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < T; ++i) total *= V;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (auto& x : cur) {
      x = static_cast<Label>(c % V);
      c /= V;
    }
    if (ref_collapse(cur) != y) continue;
    ++best.valid_paths;
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += em.at(t, cur[t]);
    auto st = ref_states(cur);
    if (!best.found || s > best.score || (s == best.score && st > best_states)) {
      best.found = true;
      best.score = s;
      best.path = cur;
      best_states = std::move(st);
    }
  }
  return best;
}

LabelSequence random_labels(std::mt19937_64& rng, std::size_t L, std::size_t V) {
  LabelSequence y(L);
  for (auto& x : y) x = static_cast<Label>(1 + rng() % (V - 1));
  return y;
}

}  // namespace

TEST(ExpandLabels, Examples) {
  EXPECT_EQ(sw::expand_labels({1}, kBlank), (std::vector<Label>{0, 1, 0}));
  EXPECT_EQ(sw::expand_labels({1, 2}, kBlank), (std::vector<Label>{0, 1, 0, 2, 0}));
  EXPECT_EQ(sw::expand_labels({1, 1}, kBlank), (std::vector<Label>{0, 1, 0, 1, 0}));
  EXPECT_THROW(sw::expand_labels({1, 0}, kBlank), sw::InvalidLabelError);
  EXPECT_THROW(sw::expand_labels({}, kBlank), sw::InvalidLabelError);
}

TEST(Collapse, Examples) {
  const std::vector<Label> a{0, 1, 1, 0, 2};
  EXPECT_EQ(sw::collapse(a, kBlank), (LabelSequence{1, 2}));
  const std::vector<Label> b{1, 0, 1};
  EXPECT_EQ(sw::collapse(b, kBlank), (LabelSequence{1, 1}));
  const std::vector<Label> c{0, 0, 0};
  EXPECT_TRUE(sw::collapse(c, kBlank).empty());
}

TEST(EmissionMatrix, Validation) {
  EXPECT_THROW(EmissionMatrix(0, 2, 0, {}), sw::ShapeError);
  EXPECT_THROW(EmissionMatrix(1, 2, 0, {0.0}), sw::ShapeError);
  EXPECT_THROW(EmissionMatrix(1, 2, 2, {std::log(0.5), std::log(0.5)}), sw::InvalidLabelError);
  EXPECT_THROW(EmissionMatrix(1, 2, 0, {std::log(0.5), std::log(0.6)}), sw::ShapeError);
  EXPECT_THROW(EmissionMatrix(1, 2, 0, {std::nan(""), 0.0}), sw::ShapeError);
  EXPECT_NO_THROW(EmissionMatrix(1, 2, 0, {sw::kNegInf, 0.0}));
}

TEST(ForceAlign, ThreeFrameExample) {
  const auto em = EmissionMatrix::from_probabilities({{0.4, 0.6}, {0.1, 0.9}, {0.3, 0.7}}, kBlank);
  const auto r = sw::force_align(em, {1});
  EXPECT_EQ(r.path, (std::vector<Label>{1, 1, 1}));
  EXPECT_NEAR(r.score, std::log(0.378), 1e-12);

  const auto oracle = enumerate(em, {1});
  // Paths of three frames holding one contiguous block of the label.
  EXPECT_EQ(oracle.valid_paths, 6u);
  EXPECT_EQ(oracle.path, r.path);
  EXPECT_EQ(oracle.score, r.score);

  const auto bf = sw::brute_force_align(em, {1});
  EXPECT_EQ(bf.path, r.path);
  EXPECT_EQ(bf.score, r.score);

  EXPECT_EQ(sw::token_boundaries(r, {1}, kBlank).spans, (std::vector<Span>{{0, 2}}));
}

TEST(ForceAlign, SingleFrame) {
  const auto em = EmissionMatrix::from_probabilities({{0.0, 1.0}}, kBlank);
  EXPECT_EQ(sw::force_align(em, {1}).path, (std::vector<Label>{1}));
}

TEST(ForceAlign, AdjacentDuplicatesNeedBlank) {
  const auto em = uniform_emissions(2, 2);
  try {
    sw::force_align(em, {1, 1});
    FAIL() << "expected infeasibility";
  } catch (const sw::InfeasibleAlignmentError& e) {
    EXPECT_EQ(e.required_frames(), 3u);
  }
  EXPECT_THROW(sw::brute_force_align(em, {1, 1}), sw::InfeasibleAlignmentError);
  EXPECT_EQ(sw::force_align(uniform_emissions(3, 2), {1, 1}).path, (std::vector<Label>{1, 0, 1}));
}

TEST(ForceAlign, UniformTwoLabels) {
  const auto em = uniform_emissions(2, 3);
  const auto r = sw::force_align(em, {1, 2});
  const auto bf = sw::brute_force_align(em, {1, 2});
  EXPECT_EQ(r.score, 2.0 * std::log(1.0 / 3.0));
  EXPECT_EQ(r.score, bf.score);
  EXPECT_EQ(r.path, bf.path);
}

TEST(ForceAlign, TieBreakEmitsEarly) {
  // Every path scores the same; each label takes one frame as early as
  // possible and the trailing blank absorbs the rest.
  EXPECT_EQ(sw::force_align(uniform_emissions(3, 2), {1}).path, (std::vector<Label>{1, 0, 0}));
  EXPECT_EQ(sw::force_align(uniform_emissions(5, 3), {1, 2}).path,
            (std::vector<Label>{1, 2, 0, 0, 0}));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t V = 2 + rng() % 3, L = 1 + rng() % 3, T = 1 + rng() % 7;
    const auto y = random_labels(rng, L, V);
    if (T < sw::min_frames_required(y)) continue;
    const auto em = uniform_emissions(T, V);
    const auto want = enumerate(em, y);
    EXPECT_EQ(sw::force_align(em, y).path, want.path);
  }
}

TEST(ForceAlign, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(17);
  int compared = 0;
  while (compared < 300) {
    const std::size_t V = 2 + rng() % 3, L = 1 + rng() % 3, T = 1 + rng() % 8;
    const auto y = random_labels(rng, L, V);
    const auto em = random_emissions(rng, T, V);
    if (T < sw::min_frames_required(y)) {
      EXPECT_THROW(sw::force_align(em, y), sw::InfeasibleAlignmentError);
      continue;
    }
    const auto r = sw::force_align(em, y);
    const auto want = enumerate(em, y);
    ASSERT_TRUE(want.found);
    ASSERT_EQ(r.score, want.score);
    ASSERT_EQ(r.path, want.path);
    ASSERT_EQ(sw::collapse(r.path, kBlank), y);
    ASSERT_NEAR(sw::path_score(em, r.path), r.score, 1e-9);
    const auto bf = sw::brute_force_align(em, y);
    ASSERT_EQ(bf.score, want.score);
    ASSERT_EQ(bf.path, want.path);
    ++compared;
  }
}

TEST(ForceAlign, FeasibilityBoundaryExhaustive) {
  // All label sequences of length 1..3 over {1, 2, 3}; T from 1 to 6.
  for (std::size_t L = 1; L <= 3; ++L) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < L; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      LabelSequence y(L);
      std::size_t c = code;
      for (auto& x : y) {
        x = static_cast<Label>(1 + c % 3);
        c /= 3;
      }
      std::size_t dups = 0;
      for (std::size_t i = 1; i < L; ++i) dups += y[i] == y[i - 1];
      for (std::size_t T = 1; T <= 6; ++T) {
        const auto em = uniform_emissions(T, 4);
        if (T >= L + dups) {
          const auto r = sw::force_align(em, y);
          EXPECT_EQ(sw::collapse(r.path, kBlank), y);
        } else {
          EXPECT_THROW(sw::force_align(em, y), sw::InfeasibleAlignmentError);
        }
      }
    }
  }
}

TEST(ForceAlign, LongSequenceStaysFinite) {
  std::mt19937_64 rng(3);
  const auto em = random_emissions(rng, 600, 30);
  const auto y = random_labels(rng, 120, 30);
  const auto r = sw::force_align(em, y);
  EXPECT_TRUE(std::isfinite(r.score));
  EXPECT_EQ(sw::collapse(r.path, kBlank), y);
  EXPECT_NEAR(sw::path_score(em, r.path), r.score, 1e-9);
}

TEST(ForceAlign, InvalidLabels) {
  const auto em = uniform_emissions(3, 3);
  EXPECT_THROW(sw::force_align(em, {}), sw::InvalidLabelError);
  EXPECT_THROW(sw::force_align(em, {0}), sw::InvalidLabelError);
  EXPECT_THROW(sw::force_align(em, {3}), sw::InvalidLabelError);
}

TEST(BruteForce, RefusesAboveCap) {
  EXPECT_THROW(sw::brute_force_align(uniform_emissions(11, 2), {1}), sw::EnumerationCapError);
  EXPECT_THROW(sw::brute_force_align(uniform_emissions(4, 2), {1}, 3), sw::EnumerationCapError);
}

TEST(TokenBoundaries, Examples) {
  const std::vector<Label> p1{0, 1, 0, 2, 2};
  EXPECT_EQ(sw::token_boundaries(p1, {1, 2}, kBlank).spans, (std::vector<Span>{{1, 1}, {3, 4}}));
  const std::vector<Label> p2{1, 0, 1};
  EXPECT_EQ(sw::token_boundaries(p2, {1, 1}, kBlank).spans, (std::vector<Span>{{0, 0}, {2, 2}}));
  EXPECT_THROW(sw::token_boundaries(p2, {1}, kBlank), sw::PreconditionError);
}

TEST(TokenBoundaries, OrderedAndDisjoint) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t V = 2 + rng() % 4, L = 1 + rng() % 6;
    const auto y = random_labels(rng, L, V);
    const std::size_t T = sw::min_frames_required(y) + rng() % 10;
    const auto r = sw::force_align(random_emissions(rng, T, V), y);
    const auto b = sw::token_boundaries(r, y, kBlank).spans;
    ASSERT_EQ(b.size(), L);
    for (std::size_t l = 0; l < L; ++l) {
      ASSERT_LE(b[l].start, b[l].end);
      ASSERT_LT(b[l].end, T);
      if (l > 0) {
        ASSERT_LT(b[l - 1].end, b[l].start);
      }
      for (std::size_t t = b[l].start; t <= b[l].end; ++t) ASSERT_EQ(r.path[t], y[l]);
    }
  }
}

TEST(MapFramesToTokens, Examples) {
  const sw::TokenBoundaries one{{{0, 2}}};
  EXPECT_EQ(sw::map_frames_to_token_indices(one, 3, 6).spans, (std::vector<Span>{{0, 5}}));
  EXPECT_EQ(sw::map_frames_to_token_indices(one, 3, 3).spans, (std::vector<Span>{{0, 2}}));
  const sw::TokenBoundaries two{{{0, 0}, {2, 2}}};
  EXPECT_EQ(sw::map_frames_to_token_indices(two, 3, 3).spans, two.spans);
  // Two frames per token.
  const sw::TokenBoundaries half{{{0, 1}, {4, 7}}};
  EXPECT_EQ(sw::map_frames_to_token_indices(half, 8, 4).spans, (std::vector<Span>{{0, 0}, {2, 3}}));
}

TEST(MapFramesToTokens, StaysOrderedWhenDownsampling) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t T = 1 + rng() % 40;
    std::vector<Span> in;
    for (std::size_t t = 0; t < T; ++t) {
      if (rng() % 3 == 0) continue;
      if (!in.empty() && in.back().end + 1 == t && rng() % 2) {
        in.back().end = t;
      } else if (in.empty() || in.back().end + 1 < t || rng() % 2) {
        in.push_back({t, t});
      }
    }
    const std::size_t N = std::max<std::size_t>(in.size(), 1) + rng() % 40;
    const auto out = sw::map_frames_to_token_indices({in}, T, N).spans;
    ASSERT_EQ(out.size(), in.size());
    for (std::size_t l = 0; l < out.size(); ++l) {
      ASSERT_LE(out[l].start, out[l].end);
      ASSERT_LT(out[l].end, N);
      if (l > 0) {
        ASSERT_LT(out[l - 1].end, out[l].start);
      }
    }
    if (N == T) {
      ASSERT_EQ(out, in);
    }
  }
  EXPECT_THROW(sw::map_frames_to_token_indices({{{0, 0}, {1, 1}}}, 2, 1), sw::PreconditionError);
  EXPECT_THROW(sw::map_frames_to_token_indices({{{0, 3}}}, 3, 3), sw::PreconditionError);
}
