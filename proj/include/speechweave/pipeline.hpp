// include/speechweave/pipeline.hpp

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

// Subcommand implementations behind the command-line tool. Each returns a
// JSON report; artifact files are written to the given output path.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "speechweave/chunker.hpp"
#include "speechweave/corpus_io.hpp"
#include "speechweave/ctc_align.hpp"
#include "speechweave/duration_model.hpp"
#include "speechweave/error.hpp"
#include "speechweave/eval_metrics.hpp"
#include "speechweave/interleave.hpp"
#include "speechweave/seed.hpp"
#include "speechweave/stream_scheduler.hpp"
#include "speechweave/token_codec.hpp"

namespace speechweave {

namespace fs = std::filesystem;

// A record-level failure that stops the run regardless of strictness.
class RecordAbort : public Error {
 public:
  using Error::Error;
};

struct PipelineConfig {
  ChunkingConfig chunking;  // language is taken from each record
  DurationModelConfig duration_model;
  DurationTrainingConfig duration_training;
  RateModel rates;
  SyntheticCorpusConfig synthetic;
  std::uint32_t vocab_size = kDefaultSpeechVocab;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool strict = false;
  bool include_text_question = true;
  double text_tokens_per_word = 1.0;  // simulate: text tokens per answer word
  double holdout_fraction = 0.1;      // train-dp
  std::size_t batch_records = 256;    // records held in memory per parallel batch

  // vocab_size and seed are copied into the sub-configs that use them.
  void sync() {
    synthetic.vocab_size = vocab_size;
    synthetic.seed = seed;
    duration_model.vocab_size = vocab_size;
    duration_training.seed = seed;
  }

  void validate() const {
    chunking.validate();
    duration_model.validate();
    duration_training.validate();
    rates.validate();
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    if (batch_records == 0) throw ConfigError("batch_records must be at least 1");
    if (!(text_tokens_per_word > 0.0) || !std::isfinite(text_tokens_per_word)) {
      throw ConfigError("text_tokens_per_word must be positive");
    }
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
      throw ConfigError("holdout_fraction must lie in [0, 1)");
    }
  }
};

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_key(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline std::set<char32_t> punctuation_from_string(const std::string& s) {
  std::set<char32_t> out;
  for (const auto& cp : utf8::decode(s)) out.insert(cp.value);
  return out;
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const Json& j) {
  PipelineConfig c;
  try {
    detail::check_keys(j,
                       {"seed", "vocab_size", "jobs", "strict", "include_text_question",
                        "text_tokens_per_word", "holdout_fraction", "batch_records", "chunking",
                        "duration_model", "duration_training", "rates", "synthetic"},
                       "config");
    detail::read_key(j, "seed", c.seed);
    detail::read_key(j, "vocab_size", c.vocab_size);
    detail::read_key(j, "jobs", c.jobs);
    detail::read_key(j, "strict", c.strict);
    detail::read_key(j, "include_text_question", c.include_text_question);
    detail::read_key(j, "text_tokens_per_word", c.text_tokens_per_word);
    detail::read_key(j, "holdout_fraction", c.holdout_fraction);
    detail::read_key(j, "batch_records", c.batch_records);
    if (j.contains("chunking")) {
      const auto& s = j.at("chunking");
      detail::check_keys(s, {"min_words", "punctuation"}, "chunking");
      detail::read_key(s, "min_words", c.chunking.min_words);
      if (s.contains("punctuation")) {
        c.chunking.punctuation = detail::punctuation_from_string(s.at("punctuation").get<std::string>());
      }
    }
    if (j.contains("duration_model")) {
      const auto& s = j.at("duration_model");
      detail::check_keys(s, {"embedding_dim", "kernel_width", "channels", "max_bucket"},
                         "duration_model");
      detail::read_key(s, "embedding_dim", c.duration_model.embedding_dim);
      detail::read_key(s, "kernel_width", c.duration_model.kernel_width);
      detail::read_key(s, "channels", c.duration_model.channels);
      detail::read_key(s, "max_bucket", c.duration_model.max_bucket);
    }
    if (j.contains("duration_training")) {
      const auto& s = j.at("duration_training");
      detail::check_keys(s, {"learning_rate", "epochs", "batch_size"}, "duration_training");
      detail::read_key(s, "learning_rate", c.duration_training.learning_rate);
      detail::read_key(s, "epochs", c.duration_training.epochs);
      detail::read_key(s, "batch_size", c.duration_training.batch_size);
    }
    if (j.contains("rates")) {
      const auto& s = j.at("rates");
      detail::check_keys(s, {"text_token_s", "speech_token_s", "synth_token_s", "playback_token_s"},
                         "rates");
      detail::read_key(s, "text_token_s", c.rates.text_token_s);
      detail::read_key(s, "speech_token_s", c.rates.speech_token_s);
      detail::read_key(s, "synth_token_s", c.rates.synth_token_s);
      detail::read_key(s, "playback_token_s", c.rates.playback_token_s);
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      auto& y = c.synthetic;
      detail::check_keys(s,
                         {"n_records", "mean_words", "question_words", "lexicon_size",
                          "count_weights", "max_runs_per_word", "gap_probability",
                          "max_gap_tokens", "punctuation_probability", "frames_per_token",
                          "sharpness", "language"},
                         "synthetic");
      detail::read_key(s, "n_records", y.n_records);
      detail::read_key(s, "mean_words", y.mean_words);
      detail::read_key(s, "question_words", y.question_words);
      detail::read_key(s, "lexicon_size", y.lexicon_size);
      detail::read_key(s, "count_weights", y.count_weights);
      detail::read_key(s, "max_runs_per_word", y.max_runs_per_word);
      detail::read_key(s, "gap_probability", y.gap_probability);
      detail::read_key(s, "max_gap_tokens", y.max_gap_tokens);
      detail::read_key(s, "punctuation_probability", y.punctuation_probability);
      detail::read_key(s, "frames_per_token", y.frames_per_token);
      detail::read_key(s, "sharpness", y.sharpness);
      if (s.contains("language")) y.language = language_from_string(s.at("language").get<std::string>());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  c.sync();
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return pipeline_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Record streaming

struct SkipEntry {
  std::string id;
  std::size_t line = 0;
  std::string reason;
};

struct StreamSummary {
  std::size_t records = 0;
  std::size_t written = 0;
  std::vector<SkipEntry> skipped;

  Json to_json() const {
    Json s = Json::array();
    for (const auto& e : skipped) s.push_back({{"id", e.id}, {"line", e.line}, {"reason", e.reason}});
    return {{"records", records}, {"written", written}, {"skipped", skipped.size()},
            {"skip_report", std::move(s)}};
  }
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception by
// index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Streams a manifest through `fn` in batches, writing each returned line to
// `out` in input order. Exceptions derived from std::exception skip the
// record (or abort under strict); RecordAbort always aborts.
template <typename Fn>
StreamSummary stream_records(const fs::path& manifest, std::ostream& out,
                             const PipelineConfig& cfg, Fn&& fn) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error("cannot open manifest " + manifest.string());
  ManifestReader reader(in);
  StreamSummary summary;
  struct Slot {
    ManifestRecord record;
    std::size_t line = 0;
    std::optional<std::string> output;
    std::string error;
    bool abort = false;
  };
  std::vector<Slot> batch;
  bool done = false;
  while (!done) {
    batch.clear();
    while (batch.size() < cfg.batch_records) {
      auto r = reader.next();
      if (!r) {
        done = true;
        break;
      }
      batch.push_back({std::move(*r), reader.line(), std::nullopt, {}, false});
    }
    parallel_for(batch.size(), cfg.jobs, [&](std::size_t i) {
      Slot& s = batch[i];
      try {
        s.output = fn(s.record);
      } catch (const RecordAbort& e) {
        s.error = e.what();
        s.abort = true;
      } catch (const std::exception& e) {
        s.error = e.what();
      }
    });
    for (auto& s : batch) {
      ++summary.records;
      if (s.output) {
        out << *s.output << '\n';
        ++summary.written;
        continue;
      }
      const std::string msg = "record '" + s.record.id + "' (line " + std::to_string(s.line) +
                              "): " + s.error;
      if (s.abort) throw RecordAbort(msg);
      if (cfg.strict) throw Error(msg);
      summary.skipped.push_back({s.record.id, s.line, s.error});
    }
  }
  if (!out) throw Error("failed writing output");
  return summary;
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline fs::path absolute_dir_of(const fs::path& file) {
  return fs::absolute(file).lexically_normal().parent_path();
}

// FNV-1a; turns record ids into seed streams.
inline std::uint64_t id_hash(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline ChunkingConfig chunking_for(const PipelineConfig& cfg, Language lang) {
  ChunkingConfig c = cfg.chunking;
  c.language = lang;
  return c;
}

// ---------------------------------------------------------------------------
// gen-synthetic

inline Json cmd_gen_synthetic(const PipelineConfig& cfg, const fs::path& out_dir) {
  const auto corpus = gen_synthetic_corpus(cfg.synthetic);
  const auto manifest = write_synthetic_corpus(corpus, out_dir);
  std::size_t tokens = 0;
  for (const auto& r : corpus.records) tokens += r.record.speech_tokens.size();
  return {{"command", "gen-synthetic"},
          {"records", corpus.records.size()},
          {"speech_tokens", tokens},
          {"manifest", manifest.filename().string()},
          {"seed", cfg.synthetic.seed},
          {"sharpness", cfg.synthetic.sharpness}};
}

// ---------------------------------------------------------------------------
// align

inline ManifestRecord align_record(ManifestRecord r, const fs::path& in_dir, const fs::path& out_dir) {
  if (!r.emissions_ref) throw Error("missing emissions_ref");
  if (!r.labels) throw Error("missing labels");
  const fs::path em_path = (in_dir / *r.emissions_ref).lexically_normal();
  const EmissionMatrix em = read_emissions(em_path);
  const AlignmentPath path = force_align(em, *r.labels);
  const TokenBoundaries frames = token_boundaries(path, *r.labels, em.blank());
  r.boundaries = map_frames_to_token_indices(frames, em.frames(), r.speech_tokens.size()).spans;
  r.emissions_ref = em_path.lexically_relative(out_dir).generic_string();
  r.extra["alignment_score"] = path.score;
  return r;
}

inline Json cmd_align(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& out_path) {
  const fs::path in_dir = absolute_dir_of(manifest);
  const fs::path out_dir = absolute_dir_of(out_path);
  auto out = open_output(out_path);
  auto summary = stream_records(manifest, out, cfg, [&](const ManifestRecord& r) {
    return serialize_record(align_record(r, in_dir, out_dir));
  });
  Json j = summary.to_json();
  j["command"] = "align";
  return j;
}

// ---------------------------------------------------------------------------
// build

enum class BuildMode { interleaved, full_com };

inline BuildMode build_mode_from_string(std::string_view s) {
  if (s == "interleaved") return BuildMode::interleaved;
  if (s == "full_com") return BuildMode::full_com;
  throw ConfigError("unknown build mode '" + std::string(s) + "'");
}

inline ConversationPair conversation_from_record(const ManifestRecord& r, const PipelineConfig& cfg) {
  if (!r.boundaries) throw Error("missing boundaries");
  if (!r.extra.contains("question_tokens")) throw Error("missing question_tokens");
  ConversationPair p;
  p.question_text = r.extra.value("question_text", std::string{});
  if (cfg.include_text_question && p.question_text.empty()) throw Error("missing question_text");
  p.question_tokens = {r.extra.at("question_tokens").get<std::vector<TokenId>>(), r.speech_vocab,
                       kDefaultFrameRateHz};
  check_tokens(p.question_tokens.tokens, r.speech_vocab);
  p.answer_text = r.text;
  p.answer_tokens = {r.speech_tokens, r.speech_vocab, kDefaultFrameRateHz};
  auto chunks = segment_text(r.text, chunking_for(cfg, r.language));
  p.answer_chunks = assign_speech_spans(std::move(chunks), TokenBoundaries{*r.boundaries},
                                        r.speech_tokens.size());
  return p;
}

// Checks that the rendered strings parse back to the source data.
inline void verify_example(const InterleavedExample& ex, const ConversationPair& pair,
                           BuildMode mode, bool include_tq) {
  const auto prompt = parse_markup(ex.prompt);
  std::vector<TokenId> q;
  for (const auto& s : prompt) {
    if (s.kind == SegmentKind::speech) q.insert(q.end(), s.tokens.begin(), s.tokens.end());
  }
  if (expand_with_counts(q, ex.prompt_run_counts, pair.question_tokens.vocab_size).tokens !=
      pair.question_tokens.tokens) {
    throw MarkupError(0, "prompt speech does not reproduce the question tokens");
  }
  const auto d = decode_response(ex.response);
  if (include_tq != d.question_text.has_value() ||
      (include_tq && *d.question_text != pair.question_text)) {
    throw MarkupError(0, "response question segment does not match");
  }
  if (d.speech_spans.size() != ex.response_run_counts.size()) {
    throw MarkupError(0, "response run-count sidecar does not match the speech blocks");
  }
  std::vector<TokenId> toks;
  std::vector<RunCount> counts;
  for (std::size_t i = 0; i < d.speech_spans.size(); ++i) {
    toks.insert(toks.end(), d.speech_spans[i].begin(), d.speech_spans[i].end());
    counts.insert(counts.end(), ex.response_run_counts[i].begin(), ex.response_run_counts[i].end());
  }
  if (expand_with_counts(toks, counts, pair.answer_tokens.vocab_size).tokens !=
      pair.answer_tokens.tokens) {
    throw MarkupError(0, "response speech does not reproduce the answer tokens");
  }
  std::vector<std::string> want;
  if (mode == BuildMode::full_com) {
    want.push_back(pair.answer_text);
  } else {
    for (const auto& c : pair.answer_chunks) want.push_back(c.text);
  }
  if (d.answer_texts != want) throw MarkupError(0, "response text does not match the answer chunks");
}

inline Json build_record(const ManifestRecord& r, const PipelineConfig& cfg, BuildMode mode,
                         const InstructionTemplateBank& bank) {
  const ConversationPair pair = conversation_from_record(r, cfg);
  RenderOptions opt;
  opt.include_text_question = cfg.include_text_question;
  const std::string lang = r.language == Language::zh ? "zh" : "en";
  opt.instruction =
      sample_instruction(bank, InstructionTask::s2s, lang, derive_seed(cfg.seed, id_hash(r.id)));
  InterleavedExample ex;
  try {
    ex = mode == BuildMode::interleaved ? render_interleaved(pair, opt) : render_full_com(pair, opt);
    verify_example(ex, pair, mode, cfg.include_text_question);
  } catch (const std::exception& e) {
    throw RecordAbort(std::string("markup validation failed: ") + e.what());
  }
  return {{"format_version", kManifestFormatVersion},
          {"id", r.id},
          {"language", to_string(r.language)},
          {"mode", mode == BuildMode::interleaved ? "interleaved" : "full_com"},
          {"prompt", ex.prompt},
          {"response", ex.response},
          {"prompt_run_counts", ex.prompt_run_counts},
          {"response_run_counts", ex.response_run_counts}};
}

inline Json cmd_build(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& out_path,
                      BuildMode mode) {
  const auto bank = default_instruction_bank();
  auto out = open_output(out_path);
  auto summary = stream_records(manifest, out, cfg, [&](const ManifestRecord& r) {
    return build_record(r, cfg, mode, bank).dump();
  });
  Json j = summary.to_json();
  j["command"] = "build";
  j["mode"] = mode == BuildMode::interleaved ? "interleaved" : "full_com";
  return j;
}

// ---------------------------------------------------------------------------
// train-dp / predict-dp

inline Json evaluation_to_json(const DurationEvaluation& e) {
  return {{"bucket_accuracy", e.bucket_accuracy},
          {"exact_accuracy", e.exact_accuracy},
          {"mean_abs_length_error", e.mean_abs_length_error},
          {"runs", e.runs},
          {"sequences", e.sequences}};
}

inline DurationExample duration_example(const ManifestRecord& r) {
  return DurationExample::from_merged(merge_runs({r.speech_tokens, r.speech_vocab, kDefaultFrameRateHz}));
}

// Record i is held out when floor((i+1)*f) > floor(i*f).
inline bool is_holdout(std::size_t i, double fraction) {
  return std::floor(static_cast<double>(i + 1) * fraction) > std::floor(static_cast<double>(i) * fraction);
}

inline Json train_and_save(const PipelineConfig& cfg, const std::vector<DurationExample>& data,
                           const fs::path& model_out) {
  std::vector<DurationExample> train, held;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (is_holdout(i, cfg.holdout_fraction) ? held : train).push_back(data[i]);
  }
  auto res = train_duration_model(train, cfg.duration_training, cfg.duration_model);
  if (model_out.has_parent_path()) fs::create_directories(model_out.parent_path());
  write_duration_model(res.params, model_out);
  Json j = {{"command", "train-dp"},
            {"train_sequences", train.size()},
            {"holdout_sequences", held.size()},
            {"epoch_losses", res.epoch_losses},
            {"train", evaluation_to_json(res.train_metrics)}};
  if (!held.empty()) j["holdout"] = evaluation_to_json(evaluate_duration_model(res.params, held));
  return j;
}

inline Json cmd_train_dp(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& model_out) {
  std::vector<DurationExample> data;
  for (const auto& r : read_manifest(manifest)) {
    if (r.speech_vocab != cfg.duration_model.vocab_size) {
      throw ConfigError("record '" + r.id + "' uses vocab " + std::to_string(r.speech_vocab) +
                        " but the model vocab is " + std::to_string(cfg.duration_model.vocab_size));
    }
    if (!r.speech_tokens.empty()) data.push_back(duration_example(r));
  }
  return train_and_save(cfg, data, model_out);
}

// Trains on the deterministic duration corpus instead of a manifest.
inline Json cmd_train_dp_synthetic(const PipelineConfig& cfg, std::size_t sequences,
                                   std::size_t length, const fs::path& model_out) {
  return train_and_save(
      cfg, make_duration_corpus(sequences, length, cfg.duration_model.vocab_size, cfg.seed), model_out);
}

inline Json cmd_predict_dp(const PipelineConfig& cfg, const fs::path& model_path,
                           const fs::path& manifest, const fs::path& out_path) {
  const auto params = read_duration_model(model_path);
  auto out = open_output(out_path);
  auto summary = stream_records(manifest, out, cfg, [&](const ManifestRecord& r) {
    ManifestRecord o = r;
    const auto merged = merge_runs({r.speech_tokens, r.speech_vocab, kDefaultFrameRateHz});
    o.extra["predicted_counts"] = predict_counts(params, merged);
    return serialize_record(o);
  });
  // Accuracy needs true counts, so score in a second streaming pass.
  DurationEvaluation total;
  std::size_t bucket_hits = 0, exact_hits = 0;
  double len_err = 0.0;
  std::ifstream in(manifest, std::ios::binary);
  ManifestReader reader(in);
  while (auto r = reader.next()) {
    if (r->speech_tokens.empty() || r->speech_vocab != params.config.vocab_size) continue;
    const DurationExample ex = duration_example(*r);
    const auto pred = predict_counts(params, ex.tokens);
    RunCount sp = 0, st = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      bucket_hits += count_to_bucket(pred[i], params.config.max_bucket) ==
                     count_to_bucket(ex.counts[i], params.config.max_bucket);
      exact_hits += pred[i] == ex.counts[i];
      sp += pred[i];
      st += ex.counts[i];
    }
    len_err += std::abs(static_cast<double>(sp) - static_cast<double>(st));
    total.runs += pred.size();
    ++total.sequences;
  }
  Json j = summary.to_json();
  j["command"] = "predict-dp";
  j["evaluation"] = evaluation_to_json(total);
  return j;
}

// ---------------------------------------------------------------------------
// simulate

inline Json comparison_to_json(const ModeComparison& c) {
  return {{"chunks", c.chunks},
          {"latency_interleaved", c.latency_interleaved},
          {"latency_full", c.latency_full},
          {"speedup", c.speedup},
          {"stalls_interleaved", c.stalls_interleaved.size()},
          {"stall_seconds_interleaved", stall_seconds(c.stalls_interleaved)},
          {"stalls_full", c.stalls_full.size()},
          {"stall_seconds_full", stall_seconds(c.stalls_full)}};
}

inline Json rates_to_json(const RateModel& r) {
  return {{"text_token_s", r.text_token_s},
          {"speech_token_s", r.speech_token_s},
          {"synth_token_s", r.synth_token_s},
          {"playback_token_s", r.playback_token_s}};
}

inline std::size_t text_tokens_for(std::size_t words, double per_word) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(words) * per_word)));
}

// Chunk totals of one aligned record.
inline std::vector<ChunkTotals> record_chunk_totals(const ManifestRecord& r, const PipelineConfig& cfg) {
  if (!r.boundaries) throw Error("missing boundaries");
  auto chunks = assign_speech_spans(segment_text(r.text, chunking_for(cfg, r.language)),
                                    TokenBoundaries{*r.boundaries}, r.speech_tokens.size());
  std::vector<ChunkTotals> out;
  for (const auto& c : chunks) {
    std::vector<TokenId> span(r.speech_tokens.begin() + static_cast<std::ptrdiff_t>(c.tokens->start),
                              r.speech_tokens.begin() + static_cast<std::ptrdiff_t>(c.tokens->end + 1));
    out.push_back({text_tokens_for(c.words.count(), cfg.text_tokens_per_word),
                   merge_runs({std::move(span), r.speech_vocab, kDefaultFrameRateHz}).runs.size(),
                   c.tokens->length()});
  }
  return out;
}

struct SimulationResult {
  Json report;
  std::string table;
};

inline SimulationResult cmd_simulate_totals(const PipelineConfig& cfg, const ResponseTotals& totals,
                                            std::size_t chunk_words) {
  const auto c = compare_modes(totals, cfg.rates, chunk_words);
  Json j = comparison_to_json(c);
  j["command"] = "simulate";
  j["source"] = "totals";
  j["rates"] = rates_to_json(cfg.rates);
  return {std::move(j), format_table(c)};
}

inline SimulationResult cmd_simulate_chunks(const PipelineConfig& cfg,
                                            const std::vector<ChunkTotals>& chunks,
                                            std::size_t question_text_tokens) {
  const auto c = compare_plans(chunks, question_text_tokens, cfg.rates);
  Json j = comparison_to_json(c);
  j["command"] = "simulate";
  j["source"] = "chunks";
  j["rates"] = rates_to_json(cfg.rates);
  return {std::move(j), format_table(c)};
}

inline SimulationResult cmd_simulate_manifest(const PipelineConfig& cfg, const fs::path& manifest) {
  std::ostringstream lines;
  // Per-record comparisons are collected through the streaming driver so
  // skips and strictness behave as in the other subcommands.
  auto summary = stream_records(manifest, lines, cfg, [&](const ManifestRecord& r) {
    std::size_t tq = 0;
    if (cfg.include_text_question) {
      tq = text_tokens_for(count_words(r.extra.value("question_text", std::string("?")),
                                       chunking_for(cfg, r.language)),
                           cfg.text_tokens_per_word);
    }
    const auto c = compare_plans(record_chunk_totals(r, cfg), tq, cfg.rates);
    Json j = comparison_to_json(c);
    j["id"] = r.id;
    return j.dump();
  });
  Json utterances = Json::array();
  std::istringstream in(lines.str());
  std::string line;
  double sum_i = 0.0, sum_f = 0.0, sum_ratio = 0.0, stall_i = 0.0, stall_f = 0.0;
  std::size_t n_stall_i = 0, n_stall_f = 0;
  while (std::getline(in, line)) {
    Json u = Json::parse(line);
    sum_i += u.at("latency_interleaved").get<double>();
    sum_f += u.at("latency_full").get<double>();
    sum_ratio += u.at("speedup").get<double>();
    stall_i += u.at("stall_seconds_interleaved").get<double>();
    stall_f += u.at("stall_seconds_full").get<double>();
    n_stall_i += u.at("stalls_interleaved").get<std::size_t>();
    n_stall_f += u.at("stalls_full").get<std::size_t>();
    utterances.push_back(std::move(u));
  }
  const std::size_t n = utterances.size();
  const double mean_i = n ? sum_i / static_cast<double>(n) : 0.0;
  const double mean_f = n ? sum_f / static_cast<double>(n) : 0.0;
  Json j = summary.to_json();
  j["command"] = "simulate";
  j["source"] = "manifest";
  j["rates"] = rates_to_json(cfg.rates);
  j["utterances"] = std::move(utterances);
  j["mean_latency_interleaved"] = mean_i;
  j["mean_latency_full"] = mean_f;
  j["corpus_speedup"] = speedup_ratio(sum_f, sum_i);
  j["mean_speedup"] = n ? sum_ratio / static_cast<double>(n) : 1.0;
  j["stalls_interleaved"] = n_stall_i;
  j["stall_seconds_interleaved"] = stall_i;
  j["stalls_full"] = n_stall_f;
  j["stall_seconds_full"] = stall_f;
  return {std::move(j), format_table(mean_i, mean_f, n_stall_i, stall_i, n_stall_f, stall_f)};
}

// ---------------------------------------------------------------------------
// eval

enum class EvalKind { er, offtarget, sim };

inline EvalKind eval_kind_from_string(std::string_view s) {
  if (s == "er") return EvalKind::er;
  if (s == "offtarget") return EvalKind::offtarget;
  if (s == "sim") return EvalKind::sim;
  throw ConfigError("unknown eval kind '" + std::string(s) + "'");
}

struct EvalOptions {
  ErrorUnit unit = ErrorUnit::word;
  bool normalize = false;
};

// Calls fn(json, line_number) for each non-blank line; any failure becomes a
// FormatError naming the line.
template <typename Fn>
void for_each_json_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(Json::parse(line), no);
    } catch (const std::exception& e) {
      throw FormatError(no, path.filename().string() + " line " + std::to_string(no) + ": " + e.what());
    }
  }
}

inline Json eval_error_rate(const fs::path& input, const EvalOptions& opt) {
  NormalizationConfig norm;
  norm.enabled = opt.normalize;
  std::vector<ErrorRateReport> parts;
  for_each_json_line(input, [&](const Json& j, std::size_t) {
    parts.push_back(edit_distance_rate(j.at("reference").get<std::string>(),
                                       j.at("hypothesis").get<std::string>(), opt.unit, norm));
  });
  if (parts.empty()) throw EmptyInputError("no reference/hypothesis pairs in " + input.string());
  const auto r = accumulate(parts, opt.unit);
  return {{"command", "eval"},
          {"kind", "er"},
          {"unit", to_string(opt.unit)},
          {"normalized", opt.normalize},
          {"pairs", parts.size()},
          {"substitutions", r.substitutions},
          {"insertions", r.insertions},
          {"deletions", r.deletions},
          {"reference_length", r.reference_length},
          {"rate", r.rate}};
}

inline Json eval_off_target(const fs::path& input) {
  std::map<std::string, std::vector<std::string>> by_lang;
  for_each_json_line(input, [&](const Json& j, std::size_t) {
    const Language lang = language_from_string(j.at("intended").get<std::string>());
    by_lang[to_string(lang)].push_back(j.at("response").get<std::string>());
  });
  if (by_lang.empty()) throw EmptyInputError("no responses in " + input.string());
  Json groups = Json::object();
  std::size_t total = 0, off = 0;
  for (const auto& [lang, responses] : by_lang) {
    const auto r = off_target_ratio(responses, language_from_string(lang));
    groups[lang] = {{"total", r.total}, {"off_target", r.off_target}, {"ratio", r.ratio},
                    {"on_target_ratio", r.on_target_ratio}};
    total += r.total;
    off += r.off_target;
  }
  const double ratio = 100.0 * static_cast<double>(off) / static_cast<double>(total);
  return {{"command", "eval"}, {"kind", "offtarget"}, {"total", total},      {"off_target", off},
          {"ratio", ratio},    {"on_target_ratio", 100.0 - ratio},         {"by_language", groups}};
}

inline Json similarity_to_json(const SimilarityReport& r) {
  return {{"pairing", r.pairing == Pairing::parallel ? "parallel" : "random"},
          {"mean", r.mean},
          {"min", r.min},
          {"max", r.max},
          {"pairs", r.pairs}};
}

inline Json eval_similarity(const fs::path& input, std::uint64_t seed) {
  std::vector<std::vector<double>> a, b;
  for_each_json_line(input, [&](const Json& j, std::size_t) {
    auto x = j.at("a").get<std::vector<double>>();
    auto y = j.at("b").get<std::vector<double>>();
    a.push_back(std::move(x));
    b.push_back(std::move(y));
  });
  Json j = {{"command", "eval"},
            {"kind", "sim"},
            {"parallel", similarity_to_json(representation_similarity(a, b, Pairing::parallel))}};
  if (a.size() >= 2) {
    j["random"] = similarity_to_json(representation_similarity(a, b, Pairing::random, seed));
  }
  return j;
}

inline Json cmd_eval(const PipelineConfig& cfg, EvalKind kind, const fs::path& input,
                     const EvalOptions& opt = {}) {
  switch (kind) {
    case EvalKind::er: return eval_error_rate(input, opt);
    case EvalKind::offtarget: return eval_off_target(input);
    case EvalKind::sim: return eval_similarity(input, cfg.seed);
  }
  throw ConfigError("unknown eval kind");
}

}  // namespace speechweave
