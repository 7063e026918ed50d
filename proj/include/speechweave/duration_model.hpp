// include/speechweave/duration_model.hpp

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

// Duration predictor: restores the repeat count of every merged speech token.
//
//   token ids -> embedding (D)
//             -> conv1d(K, C), tanh
//             -> conv1d(K, C), tanh
//             -> linear(B) logits over count buckets 1..B
//
// Both convolutions are zero-padded to keep one output per input run. The
// top bucket stands for "B or more". Training is plain minibatch SGD on the
// mean cross-entropy over all runs in a batch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "speechweave/error.hpp"
#include "speechweave/seed.hpp"
#include "speechweave/token_codec.hpp"

namespace speechweave {

struct DurationModelConfig {
  std::uint32_t vocab_size = kDefaultSpeechVocab;
  std::size_t embedding_dim = 16;
  std::size_t kernel_width = 3;
  std::size_t channels = 32;
  std::size_t max_bucket = 16;

  void validate() const {
    if (vocab_size == 0 || embedding_dim == 0 || kernel_width == 0 || channels == 0 ||
        max_bucket == 0) {
      throw ConfigError("duration model sizes must be positive");
    }
    if (kernel_width % 2 == 0) throw ConfigError("kernel width must be odd for same padding");
  }
};

struct DurationModelParams {
  DurationModelConfig config;
  std::vector<double> embedding;  // [vocab][D]
  std::vector<double> conv1_w;    // [C][D][K]
  std::vector<double> conv1_b;    // [C]
  std::vector<double> conv2_w;    // [C][C][K]
  std::vector<double> conv2_b;    // [C]
  std::vector<double> out_w;      // [B][C]
  std::vector<double> out_b;      // [B]

  // All-zero parameters of the right shapes.
  static DurationModelParams zeros(const DurationModelConfig& cfg) {
    cfg.validate();
    DurationModelParams p;
    p.config = cfg;
    const std::size_t D = cfg.embedding_dim, C = cfg.channels, K = cfg.kernel_width,
                      B = cfg.max_bucket;
    p.embedding.assign(std::size_t{cfg.vocab_size} * D, 0.0);
    p.conv1_w.assign(C * D * K, 0.0);
    p.conv1_b.assign(C, 0.0);
    p.conv2_w.assign(C * C * K, 0.0);
    p.conv2_b.assign(C, 0.0);
    p.out_w.assign(B * C, 0.0);
    p.out_b.assign(B, 0.0);
    return p;
  }

  std::vector<std::pair<std::string, std::vector<double>*>> tensors() {
    return {{"embedding", &embedding}, {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b},
            {"conv2_w", &conv2_w},     {"conv2_b", &conv2_b}, {"out_w", &out_w},
            {"out_b", &out_b}};
  }
  std::vector<std::pair<std::string, const std::vector<double>*>> tensors() const {
    return {{"embedding", &embedding}, {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b},
            {"conv2_w", &conv2_w},     {"conv2_b", &conv2_b}, {"out_w", &out_w},
            {"out_b", &out_b}};
  }

  bool operator==(const DurationModelParams& o) const {
    return tensors_equal(o) && config.vocab_size == o.config.vocab_size &&
           config.embedding_dim == o.config.embedding_dim &&
           config.kernel_width == o.config.kernel_width && config.channels == o.config.channels &&
           config.max_bucket == o.config.max_bucket;
  }

 private:
  bool tensors_equal(const DurationModelParams& o) const {
    return embedding == o.embedding && conv1_w == o.conv1_w && conv1_b == o.conv1_b &&
           conv2_w == o.conv2_w && conv2_b == o.conv2_b && out_w == o.out_w && out_b == o.out_b;
  }
};

inline DurationModelParams init_duration_model(const DurationModelConfig& cfg, std::uint64_t seed) {
  auto p = DurationModelParams::zeros(cfg);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::vector<double>& v, double scale) {
    for (double& x : v) x = (2.0 * unit_uniform(rng) - 1.0) * scale;
  };
  const double D = static_cast<double>(cfg.embedding_dim);
  const double C = static_cast<double>(cfg.channels);
  const double K = static_cast<double>(cfg.kernel_width);
  fill(p.embedding, 1.0);
  fill(p.conv1_w, std::sqrt(3.0 / (D * K)));
  fill(p.conv2_w, std::sqrt(3.0 / (C * K)));
  fill(p.out_w, std::sqrt(3.0 / C));
  return p;
}

struct DurationExample {
  std::vector<TokenId> tokens;
  std::vector<RunCount> counts;  // true run lengths, one per token

  static DurationExample from_merged(const MergedTokenSequence& m) {
    return {m.tokens(), m.counts()};
  }
};

inline std::size_t count_to_bucket(RunCount count, std::size_t max_bucket) {
  return static_cast<std::size_t>(std::min<RunCount>(std::max<RunCount>(count, 1), max_bucket)) - 1;
}

namespace detail {

struct ForwardCache {
  std::size_t n = 0;
  std::vector<double> x;       // [n][D]
  std::vector<double> h1;      // [n][C]
  std::vector<double> h2;      // [n][C]
  std::vector<double> logits;  // [n][B]
};

// out[t][c] = b[c] + sum_{j,k} w[c][j][k] * in[t + k - K/2][j]
inline void conv_same(std::span<const double> in, std::size_t n, std::size_t cin,
                      std::span<const double> w, std::span<const double> b, std::size_t cout,
                      std::size_t K, std::vector<double>& out) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  out.assign(n * cout, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double* o = out.data() + t * cout;
    for (std::size_t c = 0; c < cout; ++c) o[c] = b[c];
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      const double* x = in.data() + static_cast<std::size_t>(src) * cin;
      for (std::size_t c = 0; c < cout; ++c) {
        const double* wc = w.data() + c * cin * K;
        double acc = 0.0;
        for (std::size_t j = 0; j < cin; ++j) acc += wc[j * K + k] * x[j];
        o[c] += acc;
      }
    }
  }
}

// Accumulates dW, db and (optionally) d_in for conv_same.
inline void conv_same_backward(std::span<const double> in, std::size_t n, std::size_t cin,
                               std::span<const double> w, std::size_t cout, std::size_t K,
                               std::span<const double> d_out, std::span<double> dw,
                               std::span<double> db, std::vector<double>* d_in) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  if (d_in) d_in->assign(n * cin, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double* g = d_out.data() + t * cout;
    for (std::size_t c = 0; c < cout; ++c) db[c] += g[c];
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      const double* x = in.data() + static_cast<std::size_t>(src) * cin;
      double* dx = d_in ? d_in->data() + static_cast<std::size_t>(src) * cin : nullptr;
      for (std::size_t c = 0; c < cout; ++c) {
        const double gc = g[c];
        if (gc == 0.0) continue;
        const double* wc = w.data() + c * cin * K;
        double* dwc = dw.data() + c * cin * K;
        for (std::size_t j = 0; j < cin; ++j) {
          dwc[j * K + k] += gc * x[j];
          if (dx) dx[j] += gc * wc[j * K + k];
        }
      }
    }
  }
}

inline void forward(const DurationModelParams& p, std::span<const TokenId> tokens,
                    ForwardCache& fc) {
  const auto& cfg = p.config;
  const std::size_t n = tokens.size(), D = cfg.embedding_dim, C = cfg.channels,
                    K = cfg.kernel_width, B = cfg.max_bucket;
  fc.n = n;
  fc.x.resize(n * D);
  for (std::size_t t = 0; t < n; ++t) {
    if (tokens[t] >= cfg.vocab_size) {
      throw InvalidTokenError(t, "token id " + std::to_string(tokens[t]) + " at index " +
                                     std::to_string(t) + " outside duration model vocab");
    }
    std::copy_n(p.embedding.begin() + static_cast<std::ptrdiff_t>(tokens[t] * D), D,
                fc.x.begin() + static_cast<std::ptrdiff_t>(t * D));
  }
  conv_same(fc.x, n, D, p.conv1_w, p.conv1_b, C, K, fc.h1);
  for (double& v : fc.h1) v = std::tanh(v);
  conv_same(fc.h1, n, C, p.conv2_w, p.conv2_b, C, K, fc.h2);
  for (double& v : fc.h2) v = std::tanh(v);
  fc.logits.assign(n * B, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double* h = fc.h2.data() + t * C;
    for (std::size_t b = 0; b < B; ++b) {
      const double* wb = p.out_w.data() + b * C;
      double acc = p.out_b[b];
      for (std::size_t c = 0; c < C; ++c) acc += wb[c] * h[c];
      fc.logits[t * B + b] = acc;
    }
  }
}

}  // namespace detail

// Argmax bucket per run; ties go to the smaller count.
inline std::vector<RunCount> predict_counts(const DurationModelParams& p,
                                            std::span<const TokenId> tokens) {
  std::vector<RunCount> out;
  if (tokens.empty()) return out;
  detail::ForwardCache fc;
  detail::forward(p, tokens, fc);
  const std::size_t B = p.config.max_bucket;
  out.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double* l = fc.logits.data() + t * B;
    std::size_t best = 0;
    for (std::size_t b = 1; b < B; ++b) {
      if (l[b] > l[best]) best = b;
    }
    out.push_back(best + 1);
  }
  return out;
}

inline std::vector<RunCount> predict_counts(const DurationModelParams& p,
                                            const MergedTokenSequence& merged) {
  if (merged.vocab_size > p.config.vocab_size) {
    check_tokens(merged.tokens(), p.config.vocab_size);
  }
  return predict_counts(p, merged.tokens());
}

struct LossAndGradients {
  double loss = 0.0;
  DurationModelParams gradients;
};

inline LossAndGradients loss_and_gradients(const DurationModelParams& p,
                                           std::span<const DurationExample> batch) {
  if (batch.empty()) throw ShapeError("loss_and_gradients needs a non-empty batch");
  std::size_t total = 0;
  for (const auto& ex : batch) {
    if (ex.tokens.size() != ex.counts.size()) {
      throw ShapeError("example has " + std::to_string(ex.tokens.size()) + " tokens but " +
                       std::to_string(ex.counts.size()) + " counts");
    }
    total += ex.tokens.size();
  }
  if (total == 0) throw ShapeError("batch holds no runs");

  const auto& cfg = p.config;
  const std::size_t D = cfg.embedding_dim, C = cfg.channels, K = cfg.kernel_width,
                    B = cfg.max_bucket;
  LossAndGradients r{0.0, DurationModelParams::zeros(cfg)};
  auto& g = r.gradients;
  const double inv = 1.0 / static_cast<double>(total);

  detail::ForwardCache fc;
  std::vector<double> d_logits, d_h2, d_h1, d_x;
  for (const auto& ex : batch) {
    const std::size_t n = ex.tokens.size();
    if (n == 0) continue;
    detail::forward(p, ex.tokens, fc);

    d_logits.assign(n * B, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double* l = fc.logits.data() + t * B;
      const double m = *std::max_element(l, l + B);
      double z = 0.0;
      for (std::size_t b = 0; b < B; ++b) z += std::exp(l[b] - m);
      const double lse = m + std::log(z);
      const std::size_t target = count_to_bucket(ex.counts[t], B);
      r.loss += (lse - l[target]) * inv;
      double* dl = d_logits.data() + t * B;
      for (std::size_t b = 0; b < B; ++b) dl[b] = std::exp(l[b] - lse) * inv;
      dl[target] -= inv;
    }

    d_h2.assign(n * C, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double* h = fc.h2.data() + t * C;
      const double* dl = d_logits.data() + t * B;
      double* dh = d_h2.data() + t * C;
      for (std::size_t b = 0; b < B; ++b) {
        g.out_b[b] += dl[b];
        const double* wb = p.out_w.data() + b * C;
        double* gwb = g.out_w.data() + b * C;
        for (std::size_t c = 0; c < C; ++c) {
          gwb[c] += dl[b] * h[c];
          dh[c] += dl[b] * wb[c];
        }
      }
    }
    for (std::size_t i = 0; i < d_h2.size(); ++i) d_h2[i] *= 1.0 - fc.h2[i] * fc.h2[i];
    detail::conv_same_backward(fc.h1, n, C, p.conv2_w, C, K, d_h2, g.conv2_w, g.conv2_b, &d_h1);
    for (std::size_t i = 0; i < d_h1.size(); ++i) d_h1[i] *= 1.0 - fc.h1[i] * fc.h1[i];
    detail::conv_same_backward(fc.x, n, D, p.conv1_w, C, K, d_h1, g.conv1_w, g.conv1_b, &d_x);
    for (std::size_t t = 0; t < n; ++t) {
      double* ge = g.embedding.data() + ex.tokens[t] * D;
      for (std::size_t j = 0; j < D; ++j) ge[j] += d_x[t * D + j];
    }
  }
  return r;
}

struct DurationTrainingConfig {
  double learning_rate = 0.5;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning rate must be finite and non-negative");
    }
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be positive");
  }
};

struct DurationEvaluation {
  double bucket_accuracy = 0.0;       // predicted bucket == clamped true bucket
  double exact_accuracy = 0.0;        // predicted count == true count
  double mean_abs_length_error = 0.0; // |sum(pred) - sum(true)| per sequence
  std::size_t runs = 0;
  std::size_t sequences = 0;
};

inline DurationEvaluation evaluate_duration_model(const DurationModelParams& p,
                                                  std::span<const DurationExample> data) {
  DurationEvaluation e;
  std::size_t bucket_hits = 0, exact_hits = 0;
  double len_err = 0.0;
  for (const auto& ex : data) {
    if (ex.tokens.size() != ex.counts.size()) throw ShapeError("tokens and counts differ in length");
    const auto pred = predict_counts(p, ex.tokens);
    RunCount sp = 0, st = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      bucket_hits += count_to_bucket(pred[i], p.config.max_bucket) ==
                     count_to_bucket(ex.counts[i], p.config.max_bucket);
      exact_hits += pred[i] == ex.counts[i];
      sp += pred[i];
      st += ex.counts[i];
    }
    len_err += std::abs(static_cast<double>(sp) - static_cast<double>(st));
    e.runs += pred.size();
    ++e.sequences;
  }
  if (e.runs > 0) {
    e.bucket_accuracy = static_cast<double>(bucket_hits) / static_cast<double>(e.runs);
    e.exact_accuracy = static_cast<double>(exact_hits) / static_cast<double>(e.runs);
  }
  if (e.sequences > 0) e.mean_abs_length_error = len_err / static_cast<double>(e.sequences);
  return e;
}

struct DurationTrainingResult {
  DurationModelParams params;
  std::vector<double> epoch_losses;  // mean minibatch loss per epoch
  DurationEvaluation train_metrics;
};

// Optional per-epoch callback (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

inline DurationTrainingResult train_duration_model(std::span<const DurationExample> dataset,
                                                   const DurationTrainingConfig& cfg,
                                                   const DurationModelConfig& model_cfg,
                                                   const EpochCallback& on_epoch = {}) {
  cfg.validate();
  model_cfg.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].tokens.empty()) order.push_back(i);
  }
  if (order.empty()) throw EmptyInputError("duration training set is empty");

  DurationTrainingResult res;
  res.params = init_duration_model(model_cfg, cfg.seed);
  std::mt19937_64 rng(mix_seed(cfg.seed));
  std::vector<DurationExample> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
        batch.push_back(dataset[order[k]]);
      }
      auto lg = loss_and_gradients(res.params, batch);
      sum += lg.loss;
      ++batches;
      if (cfg.learning_rate == 0.0) continue;
      auto params = res.params.tensors();
      auto grads = lg.gradients.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto& w = *params[t].second;
        const auto& gw = *grads[t].second;
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.learning_rate * gw[k];
      }
    }
    res.epoch_losses.push_back(sum / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch, res.epoch_losses.back());
  }
  res.train_metrics = evaluate_duration_model(res.params, dataset);
  return res;
}

}  // namespace speechweave
