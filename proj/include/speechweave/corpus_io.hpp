// include/speechweave/corpus_io.hpp

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

// Manifests, emission files, synthetic corpora and model files.
//
// Manifest: one JSON object per line, keys sorted, compact separators.
//   {"boundaries":[[s,e],...], "emissions_ref":"emissions/x.swem",
//    "format_version":1, "id":"x", "labels":[...], "language":"en",
//    "run_counts":[...], "speech_tokens":[...], "speech_vocab":4096,
//    "text":"..."}
// Optional keys are omitted when absent. Any other key is carried through
// untouched.
//
// Emission file, all fields little-endian:
//   char[4] "SWEM" | u32 version (1) | u32 T | u32 V | i32 blank | f32[T*V]
// holding per-frame log-probabilities, row-major.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "speechweave/chunker.hpp"
#include "speechweave/ctc_align.hpp"
#include "speechweave/duration_model.hpp"
#include "speechweave/error.hpp"
#include "speechweave/seed.hpp"
#include "speechweave/token_codec.hpp"
#include "speechweave/utf8.hpp"

namespace speechweave {

using Json = nlohmann::json;

inline constexpr int kManifestFormatVersion = 1;
inline constexpr std::uint32_t kEmissionFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

struct ManifestRecord {
  std::string id;
  std::string text;
  Language language = Language::en;
  std::vector<TokenId> speech_tokens;
  std::uint32_t speech_vocab = kDefaultSpeechVocab;
  std::optional<std::vector<RunCount>> run_counts;
  std::optional<std::string> emissions_ref;
  std::optional<std::vector<Span>> boundaries;  // token space, one per word
  std::optional<std::vector<Label>> labels;     // aligner label ids, one per word
  Json extra = Json::object();                  // unknown keys

  void validate() const {
    if (id.empty()) throw PreconditionError("record id is empty");
    check_tokens(speech_tokens, speech_vocab);
    if (run_counts) {
      RunCount sum = 0;
      for (RunCount c : *run_counts) {
        if (c == 0) throw InvalidCountError("record " + id + " has a zero run count");
        sum += c;
      }
      if (sum != speech_tokens.size()) {
        throw PreconditionError("record " + id + ": run counts sum to " + std::to_string(sum) +
                                " but there are " + std::to_string(speech_tokens.size()) +
                                " speech tokens");
      }
    }
    if (boundaries) {
      for (std::size_t i = 0; i < boundaries->size(); ++i) {
        const Span& s = (*boundaries)[i];
        if (s.start > s.end || s.end >= speech_tokens.size() ||
            (i > 0 && s.start <= (*boundaries)[i - 1].end)) {
          throw PreconditionError("record " + id + ": boundary " + std::to_string(i) +
                                  " is out of order or out of range");
        }
      }
    }
  }

  bool operator==(const ManifestRecord&) const = default;
};

inline Json spans_to_json(const std::vector<Span>& spans) {
  Json a = Json::array();
  for (const auto& s : spans) a.push_back(Json::array({s.start, s.end}));
  return a;
}

inline std::vector<Span> spans_from_json(const Json& j) {
  std::vector<Span> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw Error("span must be a [start, end] pair");
    out.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
  }
  return out;
}

inline Json to_json(const ManifestRecord& r) {
  Json j = r.extra.is_object() ? r.extra : Json::object();
  j["format_version"] = kManifestFormatVersion;
  j["id"] = r.id;
  j["text"] = r.text;
  j["language"] = to_string(r.language);
  j["speech_tokens"] = r.speech_tokens;
  j["speech_vocab"] = r.speech_vocab;
  if (r.run_counts) j["run_counts"] = *r.run_counts;
  if (r.emissions_ref) j["emissions_ref"] = *r.emissions_ref;
  if (r.boundaries) j["boundaries"] = spans_to_json(*r.boundaries);
  if (r.labels) j["labels"] = *r.labels;
  return j;
}

inline ManifestRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  if (j.contains("format_version") && j.at("format_version") != kManifestFormatVersion) {
    throw Error("unsupported manifest format_version " + j.at("format_version").dump());
  }
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.text = j.value("text", std::string{});
  r.language = language_from_string(j.value("language", std::string("en")));
  r.speech_tokens = j.value("speech_tokens", std::vector<TokenId>{});
  r.speech_vocab = j.value("speech_vocab", kDefaultSpeechVocab);
  if (j.contains("run_counts")) r.run_counts = j.at("run_counts").get<std::vector<RunCount>>();
  if (j.contains("emissions_ref")) r.emissions_ref = j.at("emissions_ref").get<std::string>();
  if (j.contains("boundaries")) r.boundaries = spans_from_json(j.at("boundaries"));
  if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<Label>>();
  static const char* known[] = {"format_version", "id",           "text",          "language",
                                "speech_tokens",  "speech_vocab", "run_counts",    "emissions_ref",
                                "boundaries",     "labels"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) is_known = is_known || it.key() == k;
    if (!is_known) r.extra[it.key()] = it.value();
  }
  r.validate();
  return r;
}

// Canonical single-line form (no trailing newline).
inline std::string serialize_record(const ManifestRecord& r) {
  r.validate();
  return to_json(r).dump();
}

// Streams records from a JSONL source. Blank lines are skipped; ids must be
// unique across the stream.
class ManifestReader {
 public:
  explicit ManifestReader(std::istream& in) : in_(in) {}

  std::optional<ManifestRecord> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ManifestRecord r;
      try {
        r = record_from_json(Json::parse(line));
      } catch (const std::exception& e) {
        throw FormatError(line_no_, "manifest line " + std::to_string(line_no_) + ": " + e.what());
      }
      if (!seen_.insert(r.id).second) {
        throw FormatError(line_no_, "manifest line " + std::to_string(line_no_) +
                                        ": duplicate id '" + r.id + "'");
      }
      return r;
    }
    return std::nullopt;
  }
  std::size_t line() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
  std::unordered_set<std::string> seen_;
};

inline std::vector<ManifestRecord> read_manifest(std::istream& in) {
  ManifestReader reader(in);
  std::vector<ManifestRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest " + path.string());
  return read_manifest(in);
}

inline void write_manifest(const std::vector<ManifestRecord>& records, std::ostream& out) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw PreconditionError("duplicate id '" + r.id + "'");
    out << serialize_record(r) << '\n';
  }
}

inline void write_manifest(const std::vector<ManifestRecord>& records,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  write_manifest(records, out);
  if (!out) throw Error("failed writing manifest " + path.string());
}

// ---------------------------------------------------------------------------
// Emission files

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

inline std::string encode_emissions(const EmissionMatrix& em) {
  std::string buf = "SWEM";
  detail::put_u32(buf, kEmissionFormatVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(em.frames()));
  detail::put_u32(buf, static_cast<std::uint32_t>(em.vocab()));
  detail::put_u32(buf, static_cast<std::uint32_t>(em.blank()));
  buf.reserve(buf.size() + em.data().size() * 4);
  for (double v : em.data()) detail::put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return buf;
}

inline EmissionMatrix decode_emissions(std::string_view bytes) {
  constexpr std::size_t kHeader = 20;
  if (bytes.size() < kHeader || bytes.substr(0, 4) != "SWEM") throw Error("not an emission file");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = detail::get_u32(p + 4);
  if (version != kEmissionFormatVersion) {
    throw Error("unsupported emission format version " + std::to_string(version));
  }
  const std::size_t T = detail::get_u32(p + 8);
  const std::size_t V = detail::get_u32(p + 12);
  const auto blank = static_cast<Label>(static_cast<std::int32_t>(detail::get_u32(p + 16)));
  if (bytes.size() != kHeader + T * V * 4) throw Error("emission file size does not match header");
  std::vector<double> lp(T * V);
  for (std::size_t i = 0; i < lp.size(); ++i) {
    lp[i] = std::bit_cast<float>(detail::get_u32(p + kHeader + 4 * i));
  }
  return EmissionMatrix(T, V, blank, std::move(lp));
}

inline void write_emissions(const EmissionMatrix& em, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write emissions " + path.string());
  const std::string buf = encode_emissions(em);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing emissions " + path.string());
}

inline EmissionMatrix read_emissions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open emissions " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_emissions(ss.str());
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticCorpusConfig {
  std::uint32_t vocab_size = kDefaultSpeechVocab;  // speech token vocab
  std::size_t n_records = 100;
  std::size_t mean_words = 12;        // answer length; drawn from [mean/2, 3*mean/2]
  std::size_t question_words = 6;
  std::size_t lexicon_size = 40;      // distinct words; aligner vocab is lexicon + blank
  std::vector<double> count_weights = {0.45, 0.3, 0.15, 0.1};  // P(run count = 1, 2, ...)
  std::size_t max_runs_per_word = 4;
  double gap_probability = 0.3;       // silence between words
  std::size_t max_gap_tokens = 2;
  double punctuation_probability = 0.2;
  std::size_t frames_per_token = 2;   // aligner frames per speech token
  double sharpness = 0.9;             // probability on the true state per frame
  Language language = Language::en;
  std::uint64_t seed = 0;

  std::size_t aligner_vocab() const { return lexicon_size + 1; }

  void validate() const {
    if (vocab_size < 2) throw ConfigError("speech vocab must hold at least two tokens");
    if (mean_words == 0 || question_words == 0 || lexicon_size == 0 || max_runs_per_word == 0 ||
        frames_per_token == 0 || count_weights.empty()) {
      throw ConfigError("synthetic corpus sizes must be positive");
    }
    if (language == Language::other) throw ConfigError("synthetic corpus language must be en or zh");
    double total = 0.0;
    for (double w : count_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("count weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("count weights must not all be zero");
    if (!(sharpness > 1.0 / static_cast<double>(aligner_vocab()) && sharpness <= 1.0)) {
      throw ConfigError("sharpness must lie in (1/V, 1]");
    }
    if (gap_probability < 0.0 || gap_probability > 1.0 || punctuation_probability < 0.0 ||
        punctuation_probability > 1.0) {
      throw ConfigError("probabilities must lie in [0, 1]");
    }
  }
};

struct SyntheticRecord {
  ManifestRecord record;          // manifest view (emissions_ref set, no boundaries)
  EmissionMatrix emissions;       // frame-level log-probabilities
  std::vector<Span> reference;    // ground-truth word spans, token space
};

struct SyntheticCorpus {
  std::vector<SyntheticRecord> records;
};

// Surface form of lexicon entry `index`.
inline std::string lexicon_word(std::size_t index, Language lang) {
  if (lang == Language::zh) {
    // Spread over the common-character block; stride keeps them distinct.
    return utf8::encode(static_cast<char32_t>(0x4E00 + (index * 37) % 0x5000));
  }
  static const char* syllables[] = {"ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "ve", "du"};
  std::string w;
  std::size_t x = index;
  do {
    w += syllables[x % 10];
    x /= 10;
  } while (x > 0);
  if (index < 10) w += "n";
  return w;
}

namespace detail {

inline std::size_t sample_weighted(std::mt19937_64& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = unit_uniform(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

inline std::size_t uniform_in(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1));
}

// Appends `runs` runs of fresh tokens, each differing from the one before.
inline void append_runs(std::mt19937_64& rng, const SyntheticCorpusConfig& cfg, std::size_t runs,
                        std::vector<TokenId>& tokens, std::vector<RunCount>& counts) {
  for (std::size_t r = 0; r < runs; ++r) {
    TokenId t;
    do {
      t = static_cast<TokenId>(uniform_index(rng, cfg.vocab_size));
    } while (!tokens.empty() && tokens.back() == t);
    const RunCount c = sample_weighted(rng, cfg.count_weights) + 1;
    tokens.insert(tokens.end(), c, t);
    counts.push_back(c);
  }
}

inline std::string render_words(std::mt19937_64& rng, const SyntheticCorpusConfig& cfg,
                                 const std::vector<std::size_t>& words, bool question) {
  const bool zh = cfg.language == Language::zh;
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0 && !zh) s += ' ';
    s += lexicon_word(words[i], cfg.language);
    const bool last = i + 1 == words.size();
    if (last) {
      s += question ? (zh ? "？" : "?") : (zh ? "。" : ".");
    } else if (unit_uniform(rng) < cfg.punctuation_probability) {
      s += zh ? "，" : ",";
    }
  }
  return s;
}

}  // namespace detail

inline SyntheticRecord make_synthetic_record(const SyntheticCorpusConfig& cfg, std::size_t index) {
  char id_buf[32];
  std::snprintf(id_buf, sizeof(id_buf), "syn-%06zu", index);
  std::mt19937_64 rng(derive_seed(cfg.seed, index));

  const std::size_t lo = std::max<std::size_t>(1, cfg.mean_words / 2);
  const std::size_t hi = std::max(lo, cfg.mean_words + cfg.mean_words / 2);
  const std::size_t n_words = detail::uniform_in(rng, lo, hi);
  std::vector<std::size_t> words(n_words);
  for (auto& w : words) w = static_cast<std::size_t>(uniform_index(rng, cfg.lexicon_size));

  std::vector<std::size_t> q_words(cfg.question_words);
  for (auto& w : q_words) w = static_cast<std::size_t>(uniform_index(rng, cfg.lexicon_size));

  ManifestRecord rec;
  rec.id = id_buf;
  rec.language = cfg.language;
  rec.speech_vocab = cfg.vocab_size;
  rec.text = detail::render_words(rng, cfg, words, false);

  std::vector<TokenId> tokens;
  std::vector<RunCount> counts;
  std::vector<Label> frame_state;  // per speech token: blank (0) or word label
  std::vector<Span> reference;
  auto gap = [&](std::size_t min_len) {
    std::size_t n = min_len;
    if (unit_uniform(rng) < cfg.gap_probability) {
      n = std::max(n, detail::uniform_in(rng, 1, std::max<std::size_t>(1, cfg.max_gap_tokens)));
    }
    const std::size_t before = tokens.size();
    while (tokens.size() - before < n) detail::append_runs(rng, cfg, 1, tokens, counts);
    frame_state.resize(tokens.size(), 0);
  };
  gap(0);
  for (std::size_t i = 0; i < n_words; ++i) {
    // Equal neighbours need silence between them to stay separable.
    if (i > 0) gap(words[i] == words[i - 1] ? 1 : 0);
    const std::size_t start = tokens.size();
    detail::append_runs(rng, cfg, detail::uniform_in(rng, 1, cfg.max_runs_per_word), tokens, counts);
    reference.push_back({start, tokens.size() - 1});
    frame_state.resize(tokens.size(), static_cast<Label>(words[i] + 1));
  }
  gap(0);
  rec.speech_tokens = tokens;
  rec.run_counts = counts;
  // append_runs never repeats a token across runs, so these are merge_runs' runs.
  rec.labels = std::vector<Label>();
  for (std::size_t w : words) rec.labels->push_back(static_cast<Label>(w + 1));
  rec.emissions_ref = "emissions/" + rec.id + ".swem";

  std::vector<TokenId> q_tokens;
  std::vector<RunCount> q_counts;
  detail::append_runs(rng, cfg, 3 * cfg.question_words, q_tokens, q_counts);
  rec.extra["question_text"] = detail::render_words(rng, cfg, q_words, true);
  rec.extra["question_tokens"] = q_tokens;
  rec.extra["reference_boundaries"] = spans_to_json(reference);

  const std::size_t V = cfg.aligner_vocab();
  const std::size_t T = tokens.size() * cfg.frames_per_token;
  const double hit = std::log(cfg.sharpness);
  const double miss = cfg.sharpness < 1.0
                          ? std::log((1.0 - cfg.sharpness) / static_cast<double>(V - 1))
                          : kNegInf;
  std::vector<double> lp(T * V, miss);
  for (std::size_t t = 0; t < T; ++t) {
    lp[t * V + static_cast<std::size_t>(frame_state[t / cfg.frames_per_token])] = hit;
  }
  return {std::move(rec), EmissionMatrix(T, V, 0, std::move(lp)), std::move(reference)};
}

inline SyntheticCorpus gen_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
  cfg.validate();
  SyntheticCorpus c;
  c.records.reserve(cfg.n_records);
  for (std::size_t i = 0; i < cfg.n_records; ++i) c.records.push_back(make_synthetic_record(cfg, i));
  return c;
}

// Writes <dir>/manifest.jsonl and <dir>/emissions/<id>.swem.
inline std::filesystem::path write_synthetic_corpus(const SyntheticCorpus& corpus,
                                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "emissions");
  std::vector<ManifestRecord> recs;
  recs.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    write_emissions(r.emissions, dir / *r.record.emissions_ref);
    recs.push_back(r.record);
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(recs, manifest);
  return manifest;
}

// Deterministic duration corpus: each token's run length is a fixed function
// of its id, so a context-free predictor can learn it exactly.
inline RunCount default_duration_rule(TokenId t) { return 1 + (5 * RunCount{t} + 3) % 6; }

inline std::vector<DurationExample> make_duration_corpus(
    std::size_t n_sequences, std::size_t length, std::uint32_t vocab, std::uint64_t seed,
    const std::function<RunCount(TokenId)>& rule = default_duration_rule) {
  if (vocab < 2) throw ConfigError("duration corpus needs a vocab of at least two tokens");
  std::vector<DurationExample> out(n_sequences);
  for (std::size_t i = 0; i < n_sequences; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    auto& ex = out[i];
    for (std::size_t k = 0; k < length; ++k) {
      TokenId t;
      do {
        t = static_cast<TokenId>(uniform_index(rng, vocab));
      } while (!ex.tokens.empty() && ex.tokens.back() == t);
      ex.tokens.push_back(t);
      ex.counts.push_back(rule(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Duration model files (JSON; doubles print in shortest round-trip form)

inline Json duration_model_to_json(const DurationModelParams& p) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "duration_model";
  j["config"] = {{"vocab_size", p.config.vocab_size},
                 {"embedding_dim", p.config.embedding_dim},
                 {"kernel_width", p.config.kernel_width},
                 {"channels", p.config.channels},
                 {"max_bucket", p.config.max_bucket}};
  Json t = Json::object();
  for (const auto& [name, v] : p.tensors()) t[name] = *v;
  j["tensors"] = std::move(t);
  return j;
}

inline DurationModelParams duration_model_from_json(const Json& j) {
  if (j.value("kind", std::string{}) != "duration_model" ||
      j.value("format_version", 0) != kModelFormatVersion) {
    throw Error("not a duration model file of a supported version");
  }
  DurationModelConfig cfg;
  const auto& c = j.at("config");
  cfg.vocab_size = c.at("vocab_size").get<std::uint32_t>();
  cfg.embedding_dim = c.at("embedding_dim").get<std::size_t>();
  cfg.kernel_width = c.at("kernel_width").get<std::size_t>();
  cfg.channels = c.at("channels").get<std::size_t>();
  cfg.max_bucket = c.at("max_bucket").get<std::size_t>();
  auto p = DurationModelParams::zeros(cfg);
  for (auto& [name, v] : p.tensors()) {
    auto loaded = j.at("tensors").at(name).get<std::vector<double>>();
    if (loaded.size() != v->size()) throw ShapeError("tensor " + name + " has the wrong size");
    *v = std::move(loaded);
  }
  return p;
}

inline void write_duration_model(const DurationModelParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model " + path.string());
  out << duration_model_to_json(p).dump() << '\n';
}

inline DurationModelParams read_duration_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  return duration_model_from_json(Json::parse(in));
}

}  // namespace speechweave
