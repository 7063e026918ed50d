// include/speechweave/stream_scheduler.hpp

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

// Timeline model of streamed spoken responses.
//
// Three resources run in a pipeline: the language model generates tokens one
// at a time, a synthesizer turns each finished block of speech tokens into
// audio, and a player plays blocks back to back. Interleaved generation emits
// (text chunk, speech chunk) pairs so the synthesizer can start after the
// first chunk. Full chain-of-modality generation emits all text and then all
// speech; its synthesizer then works through the same block sizes. The two
// modes differ only in generation order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "speechweave/error.hpp"

namespace speechweave {

struct RateModel {
  double text_token_s = 0.02;         // per generated text token
  double speech_token_s = 0.02;       // per generated (merged) speech token
  double synth_token_s = 0.005;       // per expanded speech token
  double playback_token_s = 1.0 / 25; // per expanded speech token

  void validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(text_token_s) || !ok(speech_token_s) || !ok(synth_token_s)) {
      throw ConfigError("token rates must be finite and non-negative");
    }
    if (!std::isfinite(playback_token_s) || playback_token_s <= 0.0) {
      throw ConfigError("playback rate must be positive");
    }
  }
};

enum class GenerationMode { interleaved, full_com };

inline const char* to_string(GenerationMode m) {
  return m == GenerationMode::interleaved ? "interleaved" : "full_com";
}

struct ChunkTotals {
  std::size_t text_tokens = 0;
  std::size_t speech_merged = 0;
  std::size_t speech_expanded = 0;
  bool operator==(const ChunkTotals&) const = default;
};

struct GenerationPlan {
  GenerationMode mode = GenerationMode::interleaved;
  // Interleaved: the generation chunks. Full CoM: the synthesis blocks; the
  // generation itself is one logical chunk holding their sums.
  std::vector<ChunkTotals> chunks;
  // Transcribed question tokens generated first; 0 disables the question.
  std::size_t question_text_tokens = 0;

  void validate() const {
    if (chunks.empty()) throw ConfigError("generation plan has no chunks");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      if (c.text_tokens == 0 || c.speech_merged == 0 || c.speech_expanded == 0) {
        throw ConfigError("chunk " + std::to_string(i) + " has a zero token count");
      }
    }
  }
};

enum class EventKind { gen_text, gen_speech, synth, play };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::gen_text: return "gen_text";
    case EventKind::gen_speech: return "gen_speech";
    case EventKind::synth: return "synth";
    case EventKind::play: return "play";
  }
  return "?";
}

// Chunk index of the transcribed-question generation event.
inline constexpr int kQuestionChunk = -1;

struct ScheduleEvent {
  EventKind kind = EventKind::gen_text;
  int chunk = 0;
  double start = 0.0;
  double end = 0.0;
  std::size_t tokens = 0;
  bool operator==(const ScheduleEvent&) const = default;
};

struct ScheduleTrace {
  std::vector<ScheduleEvent> events;
  bool operator==(const ScheduleTrace&) const = default;
};

inline ScheduleTrace simulate(const GenerationPlan& plan, const RateModel& rates) {
  plan.validate();
  rates.validate();
  ScheduleTrace tr;
  double clock = 0.0;
  auto generate = [&](EventKind kind, int chunk, std::size_t n, double per_token) {
    const double start = clock;
    clock += static_cast<double>(n) * per_token;
    tr.events.push_back({kind, chunk, start, clock, n});
  };
  if (plan.question_text_tokens > 0) {
    generate(EventKind::gen_text, kQuestionChunk, plan.question_text_tokens, rates.text_token_s);
  }
  std::vector<double> ready(plan.chunks.size());
  if (plan.mode == GenerationMode::interleaved) {
    for (std::size_t i = 0; i < plan.chunks.size(); ++i) {
      generate(EventKind::gen_text, static_cast<int>(i), plan.chunks[i].text_tokens,
               rates.text_token_s);
      generate(EventKind::gen_speech, static_cast<int>(i), plan.chunks[i].speech_merged,
               rates.speech_token_s);
      ready[i] = clock;
    }
  } else {
    std::size_t text = 0, speech = 0;
    for (const auto& c : plan.chunks) {
      text += c.text_tokens;
      speech += c.speech_merged;
    }
    generate(EventKind::gen_text, 0, text, rates.text_token_s);
    generate(EventKind::gen_speech, 0, speech, rates.speech_token_s);
    std::fill(ready.begin(), ready.end(), clock);
  }
  double synth_free = 0.0, play_free = 0.0;
  for (std::size_t i = 0; i < plan.chunks.size(); ++i) {
    const std::size_t n = plan.chunks[i].speech_expanded;
    const double s0 = std::max(ready[i], synth_free);
    synth_free = s0 + static_cast<double>(n) * rates.synth_token_s;
    tr.events.push_back({EventKind::synth, static_cast<int>(i), s0, synth_free, n});
    const double p0 = std::max(synth_free, play_free);
    play_free = p0 + static_cast<double>(n) * rates.playback_token_s;
    tr.events.push_back({EventKind::play, static_cast<int>(i), p0, play_free, n});
  }
  return tr;
}

inline double first_audio_latency(const ScheduleTrace& tr) {
  bool found = false;
  double t = 0.0;
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::play && (!found || e.start < t)) {
      t = e.start;
      found = true;
    }
  }
  if (!found) throw PreconditionError("trace has no playback events");
  return t;
}

struct Stall {
  double start = 0.0;
  double duration = 0.0;
};

// Silent gaps between consecutive playback blocks.
inline std::vector<Stall> stall_report(const ScheduleTrace& tr) {
  std::vector<const ScheduleEvent*> plays;
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::play) plays.push_back(&e);
  }
  std::sort(plays.begin(), plays.end(),
            [](const ScheduleEvent* a, const ScheduleEvent* b) { return a->start < b->start; });
  std::vector<Stall> out;
  for (std::size_t i = 1; i < plays.size(); ++i) {
    const double gap = plays[i]->start - plays[i - 1]->end;
    if (gap > 0.0) out.push_back({plays[i - 1]->end, gap});
  }
  return out;
}

struct ResponseTotals {
  std::size_t words = 0;
  std::size_t text_tokens = 0;
  std::size_t speech_merged = 0;
  std::size_t speech_expanded = 0;
  std::size_t question_text_tokens = 0;
};

// Splits totals into ceil(words / chunk_size_words) chunks with every count
// spread as evenly as possible, larger shares first. The chunk count is
// capped so that no chunk receives zero of any count.
inline std::vector<ChunkTotals> split_totals(const ResponseTotals& totals,
                                             std::size_t chunk_size_words) {
  if (totals.words == 0 || totals.text_tokens == 0 || totals.speech_merged == 0 ||
      totals.speech_expanded == 0) {
    throw ConfigError("response totals must be positive");
  }
  if (chunk_size_words == 0) throw ConfigError("chunk size must be positive");
  std::size_t k = (totals.words + chunk_size_words - 1) / chunk_size_words;
  k = std::min({k, totals.text_tokens, totals.speech_merged, totals.speech_expanded});
  auto share = [k](std::size_t n, std::size_t i) { return n / k + (i < n % k ? 1 : 0); };
  std::vector<ChunkTotals> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = {share(totals.text_tokens, i), share(totals.speech_merged, i),
              share(totals.speech_expanded, i)};
  }
  return out;
}

struct ModeComparison {
  double latency_interleaved = 0.0;
  double latency_full = 0.0;
  double speedup = 1.0;
  std::size_t chunks = 0;
  std::vector<Stall> stalls_interleaved;
  std::vector<Stall> stalls_full;
  ScheduleTrace trace_interleaved;
  ScheduleTrace trace_full;
};

inline double stall_seconds(const std::vector<Stall>& s) {
  double t = 0.0;
  for (const auto& x : s) t += x.duration;
  return t;
}

inline double speedup_ratio(double full, double interleaved) {
  if (interleaved == 0.0) return full == 0.0 ? 1.0 : INFINITY;
  return full / interleaved;
}

inline ModeComparison compare_plans(const std::vector<ChunkTotals>& chunks,
                                    std::size_t question_text_tokens, const RateModel& rates) {
  ModeComparison r;
  r.chunks = chunks.size();
  GenerationPlan plan{GenerationMode::interleaved, chunks, question_text_tokens};
  r.trace_interleaved = simulate(plan, rates);
  plan.mode = GenerationMode::full_com;
  r.trace_full = simulate(plan, rates);
  r.latency_interleaved = first_audio_latency(r.trace_interleaved);
  r.latency_full = first_audio_latency(r.trace_full);
  r.speedup = speedup_ratio(r.latency_full, r.latency_interleaved);
  r.stalls_interleaved = stall_report(r.trace_interleaved);
  r.stalls_full = stall_report(r.trace_full);
  return r;
}

inline ModeComparison compare_modes(const ResponseTotals& totals, const RateModel& rates,
                                    std::size_t chunk_size_words) {
  return compare_plans(split_totals(totals, chunk_size_words), totals.question_text_tokens, rates);
}

// Per-utterance comparisons plus corpus sums of first-audio latency.
struct CorpusComparison {
  std::vector<ModeComparison> utterances;
  double total_latency_interleaved = 0.0;
  double total_latency_full = 0.0;
  double corpus_speedup = 1.0;     // ratio of the sums
  double mean_speedup = 1.0;       // mean of per-utterance ratios
  double total_stall_interleaved = 0.0;
};

inline CorpusComparison aggregate(std::vector<ModeComparison> utterances) {
  CorpusComparison c;
  double sum_ratio = 0.0;
  for (const auto& u : utterances) {
    c.total_latency_interleaved += u.latency_interleaved;
    c.total_latency_full += u.latency_full;
    c.total_stall_interleaved += stall_seconds(u.stalls_interleaved);
    sum_ratio += u.speedup;
  }
  c.corpus_speedup = speedup_ratio(c.total_latency_full, c.total_latency_interleaved);
  c.mean_speedup = utterances.empty() ? 1.0 : sum_ratio / static_cast<double>(utterances.size());
  c.utterances = std::move(utterances);
  return c;
}

// Two-row table: one line per mode with latency, speedup and stalls.
inline std::string format_table(double latency_interleaved, double latency_full,
                                std::size_t stalls_interleaved, double stall_s_interleaved,
                                std::size_t stalls_full, double stall_s_full) {
  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof(buf), "%-12s %12s %9s %7s %10s\n", "mode", "latency(s)", "speedup",
                "stalls", "stall(s)");
  s += buf;
  std::snprintf(buf, sizeof(buf), "%-12s %12.4f %8.2fx %7zu %10.4f\n", "interleaved",
                latency_interleaved, speedup_ratio(latency_full, latency_interleaved),
                stalls_interleaved, stall_s_interleaved);
  s += buf;
  std::snprintf(buf, sizeof(buf), "%-12s %12.4f %8.2fx %7zu %10.4f\n", "full_com", latency_full,
                1.0, stalls_full, stall_s_full);
  s += buf;
  return s;
}

inline std::string format_table(const ModeComparison& c) {
  return format_table(c.latency_interleaved, c.latency_full, c.stalls_interleaved.size(),
                      stall_seconds(c.stalls_interleaved), c.stalls_full.size(),
                      stall_seconds(c.stalls_full));
}

}  // namespace speechweave
