// tests/test_duration_model.cpp

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

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "speechweave/corpus_io.hpp"
#include "speechweave/duration_model.hpp"

namespace sw = speechweave;
using sw::DurationExample;
using sw::DurationModelConfig;
using sw::DurationModelParams;
using sw::TokenId;

namespace {

DurationModelConfig tiny_config() {
  DurationModelConfig c;
  c.vocab_size = 6;
  c.embedding_dim = 3;
  c.kernel_width = 3;
  c.channels = 4;
  c.max_bucket = 5;
  return c;
}

std::vector<DurationExample> random_batch(std::mt19937_64& rng, const DurationModelConfig& c) {
  std::vector<DurationExample> batch(2 + rng() % 2);
  for (auto& ex : batch) {
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      ex.tokens.push_back(static_cast<TokenId>(rng() % c.vocab_size));
      ex.counts.push_back(1 + rng() % (c.max_bucket + 2));
    }
  }
  return batch;
}

// Largest relative error of the analytic gradient against central
// differences, over every parameter. The denominator is floored at 1e-6.
double max_gradient_error(const DurationModelParams& p, const std::vector<DurationExample>& batch) {
  const double h = 1e-5;
  const auto analytic = sw::loss_and_gradients(p, batch).gradients;
  DurationModelParams probe = p;
  auto probe_t = probe.tensors();
  const auto grad_t = analytic.tensors();
  double worst = 0.0;
  for (std::size_t k = 0; k < probe_t.size(); ++k) {
    auto& w = *probe_t[k].second;
    const auto& g = *grad_t[k].second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      w[i] = keep + h;
      const double up = sw::loss_and_gradients(probe, batch).loss;
      w[i] = keep - h;
      const double down = sw::loss_and_gradients(probe, batch).loss;
      w[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(g[i]), 1e-6});
      const double err = std::abs(numeric - g[i]) / scale;
      worst = std::max(worst, err);
    }
  }
  return worst;
}

std::vector<DurationExample> learnable_corpus(std::size_t n, std::uint64_t seed) {
  return sw::make_duration_corpus(n, 24, 64, seed);
}

DurationModelConfig corpus_model() {
  DurationModelConfig c;
  c.vocab_size = 64;
  return c;
}

}  // namespace

TEST(DurationModel, ConfigValidation) {
  DurationModelConfig c;
  c.kernel_width = 4;
  EXPECT_THROW(DurationModelParams::zeros(c), sw::ConfigError);
  c = DurationModelConfig{};
  c.channels = 0;
  EXPECT_THROW(sw::init_duration_model(c, 1), sw::ConfigError);
}

TEST(DurationModel, BucketMapping) {
  EXPECT_EQ(sw::count_to_bucket(1, 16), 0u);
  EXPECT_EQ(sw::count_to_bucket(16, 16), 15u);
  EXPECT_EQ(sw::count_to_bucket(40, 16), 15u);
}

TEST(DurationModel, ForcedArgmaxGivesOnes) {
  auto p = DurationModelParams::zeros(DurationModelConfig{});
  p.out_b[0] = 1.0;
  const std::vector<TokenId> t{5, 9, 4095, 17};
  EXPECT_EQ(sw::predict_counts(p, t), (std::vector<sw::RunCount>{1, 1, 1, 1}));
  EXPECT_TRUE(sw::predict_counts(p, std::vector<TokenId>{}).empty());
  p.out_b[0] = 0.0;
  p.out_b[15] = 1.0;
  EXPECT_EQ(sw::predict_counts(p, t), (std::vector<sw::RunCount>{16, 16, 16, 16}));
}

TEST(DurationModel, InvalidTokenRejected) {
  const auto p = sw::init_duration_model(tiny_config(), 1);
  const std::vector<TokenId> t{1, 6};
  try {
    sw::predict_counts(p, t);
    FAIL() << "expected InvalidTokenError";
  } catch (const sw::InvalidTokenError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(DurationModel, UniformLogitsLoss) {
  const auto p = DurationModelParams::zeros(DurationModelConfig{});
  const std::vector<DurationExample> batch{{{1, 2, 3}, {1, 4, 30}}};
  EXPECT_NEAR(sw::loss_and_gradients(p, batch).loss, std::log(16.0), 1e-12);
}

TEST(DurationModel, DuplicatedBatchSameLoss) {
  std::mt19937_64 rng(3);
  const auto p = sw::init_duration_model(tiny_config(), 9);
  const auto batch = random_batch(rng, tiny_config());
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto a = sw::loss_and_gradients(p, batch);
  const auto b = sw::loss_and_gradients(p, doubled);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  const auto ga = a.gradients.tensors();
  const auto gb = b.gradients.tensors();
  for (std::size_t k = 0; k < ga.size(); ++k) {
    for (std::size_t i = 0; i < ga[k].second->size(); ++i) {
      EXPECT_NEAR((*ga[k].second)[i], (*gb[k].second)[i], 1e-12);
    }
  }
}

TEST(DurationModel, ShapeErrors) {
  const auto p = sw::init_duration_model(tiny_config(), 1);
  EXPECT_THROW(sw::loss_and_gradients(p, std::vector<DurationExample>{}), sw::ShapeError);
  EXPECT_THROW(sw::loss_and_gradients(p, std::vector<DurationExample>{{{1, 2}, {1}}}), sw::ShapeError);
}

TEST(DurationModel, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(101);
  for (std::uint64_t init = 0; init < 10; ++init) {
    const auto p = sw::init_duration_model(tiny_config(), 1000 + init);
    const auto batch = random_batch(rng, tiny_config());
    EXPECT_LE(max_gradient_error(p, batch), 1e-4) << "initialization " << init;
  }
}

TEST(DurationModel, TrainingIsDeterministic) {
  const auto data = learnable_corpus(40, 1);
  sw::DurationTrainingConfig tc;
  tc.epochs = 2;
  tc.seed = 77;
  const auto a = sw::train_duration_model(data, tc, corpus_model());
  const auto b = sw::train_duration_model(data, tc, corpus_model());
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  tc.seed = 78;
  EXPECT_FALSE(sw::train_duration_model(data, tc, corpus_model()).params == a.params);
}

TEST(DurationModel, ZeroLearningRateKeepsInit) {
  const auto data = learnable_corpus(20, 2);
  sw::DurationTrainingConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  tc.seed = 5;
  const auto r = sw::train_duration_model(data, tc, corpus_model());
  EXPECT_TRUE(r.params == sw::init_duration_model(corpus_model(), 5));
}

TEST(DurationModel, EmptyDatasetRejected) {
  EXPECT_THROW(sw::train_duration_model(std::vector<DurationExample>{}, {}, corpus_model()),
               sw::EmptyInputError);
}

TEST(DurationModel, LearnsDeterministicCorpus) {
  const auto train = learnable_corpus(400, 10);
  const auto held = learnable_corpus(100, 20);
  sw::DurationTrainingConfig tc;
  tc.seed = 3;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = sw::train_duration_model(train, tc, corpus_model());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);

  const auto eval = sw::evaluate_duration_model(r.params, held);
  EXPECT_GE(eval.bucket_accuracy, 0.99);

  // Loss falls over the epochs, allowing upticks of at most 5%.
  ASSERT_EQ(r.epoch_losses.size(), 20u);
  for (std::size_t e = 1; e < r.epoch_losses.size(); ++e) {
    EXPECT_LE(r.epoch_losses[e], 1.05 * r.epoch_losses[e - 1]) << "epoch " << e;
  }
  EXPECT_LT(r.epoch_losses.back(), 0.5 * r.epoch_losses.front());

  // Token 7 repeats 3 times wherever it appears.
  ASSERT_EQ(sw::default_duration_rule(7), 3u);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenId> ctx;
    for (int i = 0; i < 9; ++i) ctx.push_back(static_cast<TokenId>(8 + rng() % 56));
    ctx[rng() % ctx.size()] = 7;
    const auto pred = sw::predict_counts(r.params, ctx);
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (ctx[i] == 7) {
        EXPECT_EQ(pred[i], 3u);
      }
    }
  }

  // Expanded length equals the sum of predicted counts.
  for (const auto& ex : held) {
    const auto pred = sw::predict_counts(r.params, ex.tokens);
    sw::RunCount sum = 0;
    for (auto c : pred) sum += c;
    EXPECT_EQ(sw::expand_with_counts(ex.tokens, pred, 64).tokens.size(), sum);
  }
}
