// tests/test_stream_scheduler.cpp

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

#include "speechweave/stream_scheduler.hpp"

namespace sw = speechweave;
using sw::ChunkTotals;
using sw::EventKind;
using sw::GenerationMode;
using sw::GenerationPlan;
using sw::RateModel;

namespace {

RateModel example_rates() {
  RateModel r;
  r.text_token_s = 0.01;
  r.speech_token_s = 0.01;
  r.synth_token_s = 0.002;
  r.playback_token_s = 0.04;
  return r;
}

std::vector<ChunkTotals> four_equal() { return std::vector<ChunkTotals>(4, {5, 20, 20}); }

GenerationPlan plan(GenerationMode m, std::vector<ChunkTotals> c, std::size_t tq = 0) {
  return {m, std::move(c), tq};
}

void expect_trace_invariants(const GenerationPlan& p, const sw::ScheduleTrace& tr,
                             const RateModel& r) {
  double gen_end = 0.0;
  double play_end = 0.0;
  std::size_t text = 0, speech = 0, expanded = 0;
  double play_time = 0.0;
  std::vector<double> speech_done(p.chunks.size(), 0.0);
  std::vector<double> synth_done(p.chunks.size(), 0.0);
  for (const auto& e : tr.events) {
    ASSERT_GE(e.start, 0.0);
    ASSERT_LE(e.start, e.end);
    switch (e.kind) {
      case EventKind::gen_text:
      case EventKind::gen_speech:
        // Generation is serial.
        ASSERT_GE(e.start, gen_end);
        gen_end = e.end;
        (e.kind == EventKind::gen_text ? text : speech) += e.tokens;
        if (e.kind == EventKind::gen_speech) {
          if (p.mode == GenerationMode::interleaved) {
            speech_done[static_cast<std::size_t>(e.chunk)] = e.end;
          } else {
            std::fill(speech_done.begin(), speech_done.end(), e.end);
          }
        }
        break;
      case EventKind::synth:
        ASSERT_GE(e.start, speech_done[static_cast<std::size_t>(e.chunk)]);
        synth_done[static_cast<std::size_t>(e.chunk)] = e.end;
        break;
      case EventKind::play:
        ASSERT_GE(e.start, synth_done[static_cast<std::size_t>(e.chunk)]);
        ASSERT_GE(e.start, play_end);
        play_end = e.end;
        expanded += e.tokens;
        play_time += e.end - e.start;
        break;
    }
  }
  std::size_t want_text = p.question_text_tokens, want_speech = 0, want_expanded = 0;
  for (const auto& c : p.chunks) {
    want_text += c.text_tokens;
    want_speech += c.speech_merged;
    want_expanded += c.speech_expanded;
  }
  EXPECT_EQ(text, want_text);
  EXPECT_EQ(speech, want_speech);
  EXPECT_EQ(expanded, want_expanded);
  EXPECT_NEAR(play_time, static_cast<double>(want_expanded) * r.playback_token_s, 1e-9);
}

}  // namespace

TEST(Simulate, SingleChunkExample) {
  const auto tr = sw::simulate(plan(GenerationMode::interleaved, {{5, 20, 20}}), example_rates());
  EXPECT_NEAR(sw::first_audio_latency(tr), 5 * 0.01 + 20 * 0.01 + 20 * 0.002, 1e-12);
  EXPECT_NEAR(sw::first_audio_latency(tr), 0.29, 1e-12);
}

TEST(Simulate, FreeGenerationPlaysImmediately) {
  RateModel r{0.0, 0.0, 0.0, 0.04};
  const auto tr = sw::simulate(plan(GenerationMode::interleaved, four_equal(), 3), r);
  EXPECT_EQ(sw::first_audio_latency(tr), 0.0);
  EXPECT_TRUE(sw::stall_report(tr).empty());
}

TEST(Simulate, FourChunkWorkedExample) {
  const auto c = sw::compare_plans(four_equal(), 0, example_rates());
  EXPECT_NEAR(c.latency_interleaved, 0.29, 1e-12);
  EXPECT_NEAR(c.latency_full, 20 * 0.01 + 80 * 0.01 + 20 * 0.002, 1e-12);
  EXPECT_NEAR(c.latency_full, 1.04, 1e-12);
  EXPECT_NEAR(c.speedup, 1.04 / 0.29, 1e-9);
  EXPECT_EQ(std::round(c.speedup * 100) / 100, 3.59);
}

TEST(Simulate, TraceInvariantsHold) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ChunkTotals> chunks(1 + rng() % 6);
    for (auto& c : chunks) {
      c = {1 + rng() % 12, 1 + rng() % 40, 0};
      c.speech_expanded = c.speech_merged + rng() % 40;
    }
    RateModel r{0.001 * static_cast<double>(rng() % 50), 0.001 * static_cast<double>(rng() % 50),
                0.001 * static_cast<double>(rng() % 10), 0.01 + 0.001 * static_cast<double>(rng() % 60)};
    for (auto mode : {GenerationMode::interleaved, GenerationMode::full_com}) {
      const auto p = plan(mode, chunks, rng() % 3 == 0 ? 0 : 1 + rng() % 10);
      expect_trace_invariants(p, sw::simulate(p, r), r);
    }
  }
}

TEST(Simulate, OneChunkModesAreEventIdentical) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const ChunkTotals c{1 + rng() % 20, 1 + rng() % 50, 50 + rng() % 50};
    const RateModel r{0.01, 0.02, 0.003, 0.04};
    const std::size_t tq = rng() % 5;
    EXPECT_EQ(sw::simulate(plan(GenerationMode::interleaved, {c}, tq), r),
              sw::simulate(plan(GenerationMode::full_com, {c}, tq), r));
  }
}

TEST(Simulate, Validation) {
  EXPECT_THROW(sw::simulate(plan(GenerationMode::interleaved, {}), example_rates()), sw::ConfigError);
  EXPECT_THROW(sw::simulate(plan(GenerationMode::interleaved, {{0, 1, 1}}), example_rates()),
               sw::ConfigError);
  RateModel bad = example_rates();
  bad.playback_token_s = 0.0;
  EXPECT_THROW(sw::simulate(plan(GenerationMode::interleaved, {{1, 1, 1}}), bad), sw::ConfigError);
  bad = example_rates();
  bad.text_token_s = -0.1;
  EXPECT_THROW(sw::simulate(plan(GenerationMode::interleaved, {{1, 1, 1}}), bad), sw::ConfigError);
  EXPECT_THROW(sw::first_audio_latency({}), sw::PreconditionError);
}

TEST(StallReport, SlowGenerationStalls) {
  const RateModel r{0.0, 0.1, 0.0, 0.04};
  const auto tr = sw::simulate(plan(GenerationMode::interleaved, std::vector<ChunkTotals>(3, {1, 10, 10})), r);
  const auto stalls = sw::stall_report(tr);
  ASSERT_EQ(stalls.size(), 2u);
  // Chunk 0 plays 1.0 to 1.4; chunk 1 is ready at 2.0.
  EXPECT_NEAR(stalls[0].start, 1.4, 1e-12);
  EXPECT_NEAR(stalls[0].duration, 0.6, 1e-12);
}

TEST(StallReport, FastGenerationAndSingleChunkDoNotStall) {
  const RateModel fast{0.0001, 0.0001, 0.0001, 0.04};
  EXPECT_TRUE(sw::stall_report(sw::simulate(plan(GenerationMode::interleaved, four_equal()), fast)).empty());
  const RateModel slow{0.5, 0.5, 0.5, 0.04};
  EXPECT_TRUE(sw::stall_report(sw::simulate(plan(GenerationMode::interleaved, {{5, 20, 20}}), slow)).empty());
}

TEST(CompareModes, WholeAnswerChunkIsNoSpeedup) {
  const sw::ResponseTotals t{20, 25, 80, 120, 6};
  const auto c = sw::compare_modes(t, example_rates(), 20);
  EXPECT_EQ(c.chunks, 1u);
  EXPECT_EQ(c.speedup, 1.0);
  EXPECT_EQ(sw::compare_modes(t, example_rates(), 1000).speedup, 1.0);
}

TEST(CompareModes, WorkedExampleFromTotals) {
  const sw::ResponseTotals t{28, 20, 80, 80, 0};
  const auto c = sw::compare_modes(t, example_rates(), 7);
  EXPECT_EQ(c.chunks, 4u);
  EXPECT_NEAR(c.speedup, 1.04 / 0.29, 1e-9);
}

TEST(CompareModes, SplitTotalsSharesEvenly) {
  const auto s = sw::split_totals({10, 11, 7, 30, 0}, 4);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], (ChunkTotals{4, 3, 10}));
  EXPECT_EQ(s[1], (ChunkTotals{4, 2, 10}));
  EXPECT_EQ(s[2], (ChunkTotals{3, 2, 10}));
  // Never more chunks than the smallest count allows.
  EXPECT_EQ(sw::split_totals({100, 2, 50, 50, 0}, 1).size(), 2u);
  EXPECT_THROW(sw::split_totals({0, 1, 1, 1, 0}, 1), sw::ConfigError);
  EXPECT_THROW(sw::split_totals({1, 1, 1, 1, 0}, 0), sw::ConfigError);
}

TEST(CompareModes, DominanceOverRateGrid) {
  const double vals[] = {0.0, 0.01, 0.05};
  const double play[] = {0.02, 0.04, 0.08};
  const std::vector<std::vector<ChunkTotals>> chunkings = {
      {{5, 20, 20}},
      four_equal(),
      {{3, 10, 15}, {9, 40, 60}},
      {{12, 60, 90}, {1, 2, 2}, {7, 30, 31}},
      {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {40, 200, 300}},
  };
  int checked = 0;
  for (double a : vals) {
    for (double b : vals) {
      for (double c : vals) {
        for (double p : play) {
          for (const auto& ch : chunkings) {
            const auto cmp = sw::compare_plans(ch, 4, {a, b, c, p});
            EXPECT_LE(cmp.latency_interleaved, cmp.latency_full);
            EXPECT_GE(cmp.speedup, 1.0);
            ++checked;
          }
        }
      }
    }
  }
  EXPECT_EQ(checked, 81 * 5);
}

TEST(CompareModes, SmallerChunksNeverStartLater) {
  const sw::ResponseTotals t{60, 75, 300, 450, 8};
  double prev = INFINITY;
  for (std::size_t cs : {64, 32, 16, 8, 4, 2, 1}) {
    const double lat = sw::compare_modes(t, example_rates(), cs).latency_interleaved;
    EXPECT_LE(lat, prev) << "chunk size " << cs;
    prev = lat;
  }
}

TEST(CompareModes, LatencyGrowsWithFirstChunk) {
  const RateModel r = example_rates();
  for (std::size_t text = 1; text < 10; ++text) {
    for (std::size_t sp = 1; sp < 10; ++sp) {
      const double base = sw::compare_plans({{text, sp, 20}, {5, 5, 5}}, 0, r).latency_interleaved;
      EXPECT_LE(base, sw::compare_plans({{text + 1, sp, 20}, {5, 5, 5}}, 0, r).latency_interleaved);
      EXPECT_LE(base, sw::compare_plans({{text, sp + 1, 20}, {5, 5, 5}}, 0, r).latency_interleaved);
    }
  }
}

TEST(Aggregate, SumsAndMeans) {
  std::vector<sw::ModeComparison> u = {sw::compare_plans(four_equal(), 0, example_rates()),
                                       sw::compare_plans({{5, 20, 20}}, 0, example_rates())};
  const auto agg = sw::aggregate(u);
  EXPECT_NEAR(agg.total_latency_interleaved, 0.58, 1e-12);
  EXPECT_NEAR(agg.total_latency_full, 1.33, 1e-12);
  EXPECT_NEAR(agg.corpus_speedup, 1.33 / 0.58, 1e-9);
  EXPECT_NEAR(agg.mean_speedup, (1.04 / 0.29 + 1.0) / 2, 1e-9);
}

TEST(FormatTable, HasColumns) {
  const auto s = sw::format_table(sw::compare_plans(four_equal(), 0, example_rates()));
  EXPECT_NE(s.find("latency(s)"), std::string::npos);
  EXPECT_NE(s.find("speedup"), std::string::npos);
  EXPECT_NE(s.find("stalls"), std::string::npos);
  EXPECT_NE(s.find("3.59x"), std::string::npos);
  EXPECT_NE(s.find("interleaved"), std::string::npos);
  EXPECT_NE(s.find("full_com"), std::string::npos);
}
