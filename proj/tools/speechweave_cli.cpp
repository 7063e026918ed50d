// tools/speechweave_cli.cpp

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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "speechweave.hpp"

namespace sw = speechweave;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  bool strict = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed; overrides the config");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--strict", c.strict, "abort on the first record error instead of skipping");
}

sw::PipelineConfig resolve(const Common& c) {
  sw::PipelineConfig cfg = c.config.empty() ? sw::PipelineConfig{} : sw::load_pipeline_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.strict) cfg.strict = true;
  cfg.sync();
  cfg.validate();
  return cfg;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sw::Error("cannot write " + path);
  out << text;
}

void emit(const sw::Json& j, const std::string& path) { emit(j.dump(2) + "\n", path); }

std::vector<std::size_t> parse_sizes(const std::string& s, char sep) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(item, &pos);
    if (pos != item.size()) throw sw::ConfigError("not a count: '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speechweave: speech-text interleaving data pipeline"};
  app.require_subcommand(1);

  // gen-synthetic
  Common gen_c;
  std::string gen_out, gen_lang;
  std::optional<std::size_t> gen_records;
  std::optional<double> gen_sharpness;
  auto* gen = app.add_subcommand("gen-synthetic", "write a seeded synthetic corpus");
  add_common(gen, gen_c);
  gen->add_option("--out,-o", gen_out, "output directory")->required();
  gen->add_option("--records", gen_records, "number of records");
  gen->add_option("--sharpness", gen_sharpness, "probability on the true state per frame");
  gen->add_option("--language", gen_lang, "en or zh")->check(CLI::IsMember({"en", "zh"}));

  // align
  Common al_c;
  std::string al_in, al_out, al_report;
  auto* al = app.add_subcommand("align", "forced-align every record");
  add_common(al, al_c);
  al->add_option("manifest", al_in, "input manifest")->required()->check(CLI::ExistingFile);
  al->add_option("--out,-o", al_out, "output manifest")->required();
  al->add_option("--report", al_report, "write the summary here instead of stdout");

  // build
  Common bu_c;
  std::string bu_in, bu_out, bu_report, bu_mode = "interleaved";
  bool bu_no_tq = false;
  auto* bu = app.add_subcommand("build", "render interleaved training examples");
  add_common(bu, bu_c);
  bu->add_option("manifest", bu_in, "aligned manifest")->required()->check(CLI::ExistingFile);
  bu->add_option("--out,-o", bu_out, "output JSONL")->required();
  bu->add_option("--mode", bu_mode, "interleaved or full_com")
      ->check(CLI::IsMember({"interleaved", "full_com"}));
  bu->add_flag("--no-text-question", bu_no_tq, "omit the transcribed question");
  bu->add_option("--report", bu_report, "write the summary here instead of stdout");

  // train-dp
  Common tr_c;
  std::string tr_in, tr_out, tr_report;
  std::size_t tr_synth = 0, tr_len = 24;
  auto* tr = app.add_subcommand("train-dp", "train the duration predictor");
  add_common(tr, tr_c);
  tr->add_option("manifest", tr_in, "training manifest")->check(CLI::ExistingFile);
  tr->add_option("--synthetic", tr_synth, "train on N sequences of the deterministic duration corpus");
  tr->add_option("--length", tr_len, "sequence length for --synthetic");
  tr->add_option("--out,-o", tr_out, "model file")->required();
  tr->add_option("--report", tr_report, "write the summary here instead of stdout");

  // predict-dp
  Common pr_c;
  std::string pr_model, pr_in, pr_out, pr_report;
  auto* pr = app.add_subcommand("predict-dp", "predict run counts for every record");
  add_common(pr, pr_c);
  pr->add_option("--model", pr_model, "model file")->required()->check(CLI::ExistingFile);
  pr->add_option("manifest", pr_in, "input manifest")->required()->check(CLI::ExistingFile);
  pr->add_option("--out,-o", pr_out, "output manifest")->required();
  pr->add_option("--report", pr_report, "write the summary here instead of stdout");

  // simulate
  Common si_c;
  std::string si_manifest, si_totals, si_chunks, si_out, si_format = "json";
  std::size_t si_chunk_words = 7, si_tq = 0;
  auto* si = app.add_subcommand("simulate", "compare first-audio latency of the two generation orders");
  add_common(si, si_c);
  auto* o_man = si->add_option("--manifest", si_manifest, "aligned manifest")->check(CLI::ExistingFile);
  auto* o_tot = si->add_option("--totals", si_totals,
                               "words,text_tokens,merged,expanded[,question_text_tokens]");
  auto* o_chk = si->add_option("--chunks", si_chunks, "text:merged:expanded per chunk, comma separated");
  o_man->excludes(o_tot)->excludes(o_chk);
  o_tot->excludes(o_chk);
  si->add_option("--chunk-words", si_chunk_words, "words per chunk for --totals")
      ->check(CLI::PositiveNumber);
  si->add_option("--question-tokens", si_tq, "question text tokens for --chunks");
  si->add_option("--format", si_format, "json or table")->check(CLI::IsMember({"json", "table"}));
  si->add_option("--out,-o", si_out, "report file");

  // eval
  Common ev_c;
  std::string ev_kind, ev_in, ev_out, ev_unit = "word";
  bool ev_norm = false;
  auto* ev = app.add_subcommand("eval", "error rate, off-target ratio or similarity");
  add_common(ev, ev_c);
  ev->add_option("--kind", ev_kind, "er, offtarget or sim")
      ->required()
      ->check(CLI::IsMember({"er", "offtarget", "sim"}));
  ev->add_option("input", ev_in, "JSONL input")->required()->check(CLI::ExistingFile);
  ev->add_option("--unit", ev_unit, "word or char")->check(CLI::IsMember({"word", "char"}));
  ev->add_flag("--normalize", ev_norm, "lowercase and strip punctuation first");
  ev->add_option("--out,-o", ev_out, "report file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto cfg = resolve(gen_c);
      if (gen_records) cfg.synthetic.n_records = *gen_records;
      if (gen_sharpness) cfg.synthetic.sharpness = *gen_sharpness;
      if (!gen_lang.empty()) cfg.synthetic.language = sw::language_from_string(gen_lang);
      emit(sw::cmd_gen_synthetic(cfg, gen_out), "");
    } else if (al->parsed()) {
      const auto cfg = resolve(al_c);
      emit(sw::cmd_align(cfg, al_in, al_out), al_report);
    } else if (bu->parsed()) {
      auto cfg = resolve(bu_c);
      if (bu_no_tq) cfg.include_text_question = false;
      emit(sw::cmd_build(cfg, bu_in, bu_out, sw::build_mode_from_string(bu_mode)), bu_report);
    } else if (tr->parsed()) {
      const auto cfg = resolve(tr_c);
      if (tr_in.empty() == (tr_synth == 0)) {
        throw sw::ConfigError("train-dp needs exactly one of a manifest or --synthetic N");
      }
      emit(tr_synth > 0 ? sw::cmd_train_dp_synthetic(cfg, tr_synth, tr_len, tr_out)
                        : sw::cmd_train_dp(cfg, tr_in, tr_out),
           tr_report);
    } else if (pr->parsed()) {
      const auto cfg = resolve(pr_c);
      emit(sw::cmd_predict_dp(cfg, pr_model, pr_in, pr_out), pr_report);
    } else if (si->parsed()) {
      const auto cfg = resolve(si_c);
      sw::SimulationResult res;
      if (!si_manifest.empty()) {
        res = sw::cmd_simulate_manifest(cfg, si_manifest);
      } else if (!si_totals.empty()) {
        const auto v = parse_sizes(si_totals, ',');
        if (v.size() != 4 && v.size() != 5) throw sw::ConfigError("--totals takes 4 or 5 counts");
        sw::ResponseTotals t{v[0], v[1], v[2], v[3], v.size() == 5 ? v[4] : 0};
        res = sw::cmd_simulate_totals(cfg, t, si_chunk_words);
      } else if (!si_chunks.empty()) {
        std::vector<sw::ChunkTotals> chunks;
        std::stringstream ss(si_chunks);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const auto v = parse_sizes(item, ':');
          if (v.size() != 3) throw sw::ConfigError("each chunk needs text:merged:expanded");
          chunks.push_back({v[0], v[1], v[2]});
        }
        res = sw::cmd_simulate_chunks(cfg, chunks, si_tq);
      } else {
        throw sw::ConfigError("simulate needs --manifest, --totals or --chunks");
      }
      if (si_format == "table") {
        emit(res.table, si_out);
      } else {
        emit(res.report, si_out);
      }
    } else if (ev->parsed()) {
      const auto cfg = resolve(ev_c);
      sw::EvalOptions opt;
      opt.unit = ev_unit == "char" ? sw::ErrorUnit::character : sw::ErrorUnit::word;
      opt.normalize = ev_norm;
      emit(sw::cmd_eval(cfg, sw::eval_kind_from_string(ev_kind), ev_in, opt), ev_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "speechweave: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
