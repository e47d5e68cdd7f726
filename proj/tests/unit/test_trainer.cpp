#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nae/adam.hpp"
#include "nae/errors.hpp"
#include "nae/metrics.hpp"
#include "nae/trainer.hpp"

using namespace nae;

namespace {

Waveform tone(double hz, double seconds, int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  for (int i = 0; i < static_cast<int>(seconds * rate); ++i) w.samples.push_back(0.5 * std::sin(2 * std::numbers::pi * hz * i / rate));
  return w;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = 3e-3;
  c.snippet_seconds = 0.25;
  c.batch_size = 2;
  return c;
}

}  // namespace

TEST(Adam, FirstStepIsLearningRate) {
  for (double g : {1e-4, 0.3, 50.0}) {
    Tensor p({3}, {1.0, -2.0, 0.5}, true);
    for (double& v : p.grad()) v = g;
    AdamState st;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    std::vector<Tensor> ps{p};
    adam_step(ps, st, cfg);
    EXPECT_NEAR(p.values()[0], 1.0 - 0.01, 1e-6);
    EXPECT_NEAR(p.values()[1], -2.0 - 0.01, 1e-6);
    EXPECT_EQ(st.step, 1u);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p({2}, {1.0, 2.0}, true);
  std::vector<Tensor> ps{p};
  AdamState st;
  AdamConfig cfg;
  for (double& v : p.grad()) v = 1.0;
  adam_step(ps, st, cfg);
  std::vector<double> after(p.values().begin(), p.values().end());
  double m0 = st.first_moment[0][0];
  p.zero_grad();
  AdamState fresh;
  Tensor q({2}, {1.0, 2.0}, true);
  std::vector<Tensor> qs{q};
  adam_step(qs, fresh, cfg);
  EXPECT_EQ(q.values()[0], 1.0);
  EXPECT_EQ(q.values()[1], 2.0);
  adam_step(ps, st, cfg);
  EXPECT_NEAR(st.first_moment[0][0], 0.9 * m0, 1e-15);
}

TEST(Adam, QuadraticBowl) {
  Tensor w = Tensor::scalar(3.0, true);
  std::vector<Tensor> ps{w};
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  for (int i = 0; i < 500; ++i) {
    w.grad()[0] = 2 * w.values()[0];
    adam_step(ps, st, cfg);
  }
  EXPECT_LT(std::abs(w.values()[0]), 1e-3);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.adam_beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.snippet_seconds = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(TrainConfig{}.snippet_seconds, 2.0);
}

TEST(SnippetSampler, FullWindowsOnly) {
  SnippetSampler s({100, 10, 50}, 40, 3);
  std::vector<int> hits(3, 0);
  for (int i = 0; i < 2000; ++i) {
    auto d = s.next();
    ASSERT_NE(d.item, 1u);
    ASSERT_LE(d.offset + 40, d.item == 0 ? 100u : 50u);
    ++hits[d.item];
  }
  // 61 valid offsets in item 0, 11 in item 2.
  EXPECT_GT(hits[0], hits[2] * 3);
  SnippetSampler a({100}, 40, 9), b({100}, 40, 9);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.next().offset, b.next().offset);
}

TEST(TrainGenerative, ImprovesOnRepeatedTone) {
  auto m = EndToEndNae::build(ModelConfig::tiny());
  auto r = train_generative(m, {tone(440, 1.0)}, quick(40));
  ASSERT_EQ(r.history.size(), 40u);
  EXPECT_GT(r.history.back(), r.initial_objective);
  EXPECT_GT(r.history.back(), r.history.front());
}

TEST(TrainGenerative, DeterministicHistory) {
  auto corpus = std::vector<Waveform>{tone(300, 1.0), tone(520, 0.6)};
  auto a = EndToEndNae::build(ModelConfig::tiny()), b = EndToEndNae::build(ModelConfig::tiny());
  auto ra = train_generative(a, corpus, quick(3)), rb = train_generative(b, corpus, quick(3));
  EXPECT_EQ(ra.history, rb.history);
  EXPECT_EQ(serialize(a), serialize(b));
}

TEST(TrainGenerative, Errors) {
  auto m = EndToEndNae::build(ModelConfig::tiny());
  EXPECT_THROW(train_generative(m, {}, quick(1)), ContractError);
  EXPECT_THROW(train_generative(m, {tone(440, 0.1)}, quick(1)), ContractError);
  Waveform other = tone(440, 1.0, 8000);
  EXPECT_THROW(train_generative(m, {other}, quick(1)), ContractError);
}

TEST(TrainGenerative, L1PenaltyRuns) {
  auto m = EndToEndNae::build(ModelConfig::tiny());
  auto c = quick(2);
  c.l1_activation_weight = 0.1;
  auto r = train_generative(m, {tone(440, 1.0)}, c);
  for (double h : r.history) EXPECT_TRUE(std::isfinite(h));
}

TEST(TrainDiscriminative, TargetEqualsInputMatchesGenerative) {
  Waveform x = tone(440, 0.25);
  auto a = EndToEndNae::build(ModelConfig::tiny()), b = EndToEndNae::build(ModelConfig::tiny());
  auto ra = train_generative(a, {x}, quick(3));
  auto rb = train_discriminative(b, {{x, x}}, quick(3));
  EXPECT_EQ(ra.history, rb.history);
  EXPECT_EQ(ra.initial_objective, rb.initial_objective);
}

TEST(TrainDiscriminative, MismatchedLengths) {
  auto m = EndToEndNae::build(ModelConfig::tiny());
  EXPECT_THROW(train_discriminative(m, {{tone(440, 0.5), tone(440, 0.4)}}, quick(1)), ContractError);
}

TEST(TrainDiscriminative, SeparatesTwoTones) {
  std::vector<TrainingPair> pairs;
  Waveform a = tone(220, 1.0), b = tone(3100, 1.0);
  for (int k = 0; k < 8; ++k) {
    Waveform sa = snippet(a, 0.25, 10 + k), sb = snippet(b, 0.25, 50 + k);
    Mixture m = mix_at_snr({sa, sb}, {0, 0.0});
    pairs.push_back({m.mixture, m.sources[0]});
  }
  auto model = EndToEndNae::build(ModelConfig::tiny());
  train_discriminative(model, pairs, quick(60));
  Waveform ta = snippet(tone(220, 1.0), 0.25, 999), tb = snippet(tone(3100, 1.0), 0.25, 998);
  Mixture m = mix_at_snr({ta, tb}, {0, 0.0});
  double base = sisdr(m.mixture, m.sources[0]);
  EXPECT_GE(sisdr(model.forward(m.mixture), m.sources[0]) - base, 5.0);
}

TEST(LossCsv, Format) {
  EXPECT_EQ(loss_history_csv({1.5, 2.0}), "epoch,mean_objective\n1,1.5\n2,2\n");
}
