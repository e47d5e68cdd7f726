#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nae/adam.hpp"
#include "nae/audio.hpp"
#include "nae/model.hpp"

namespace nae {

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 4;
  std::size_t epochs = 20;
  double snippet_seconds = 2.0;
  std::uint64_t seed = 0;
  // Weight on mean(H) added to the loss; zero disables it.
  double l1_activation_weight = 0.0;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

struct TrainResult {
  // Mean sdr_objective per epoch.
  std::vector<double> history;
  // Mean objective of the first batch, measured before any update.
  double initial_objective = 0.0;
};

struct TrainingPair {
  Waveform input;
  Waveform target;
};

// Maximizes the mean sdr_objective(forward(x), x) over random snippets of the
// corpus with Adam. Batch norm runs in train mode.
TrainResult train_generative(EndToEndNae& model, const std::vector<Waveform>& corpus,
                             const TrainConfig& config);

// Denoising-autoencoder baseline: maximizes sdr_objective(forward(input), target).
TrainResult train_discriminative(EndToEndNae& model, const std::vector<TrainingPair>& pairs,
                                 const TrainConfig& config);

// Draws fixed-length windows uniformly over every valid (item, offset) pair.
class SnippetSampler {
 public:
  struct Draw {
    std::size_t item;
    std::size_t offset;
  };

  SnippetSampler(const std::vector<std::size_t>& item_lengths, std::size_t window,
                 std::uint64_t seed);
  Draw next();
  std::size_t window() const { return window_; }

 private:
  std::vector<std::size_t> cumulative_;  // running count of valid offsets
  std::vector<std::size_t> items_;
  std::vector<std::size_t> lengths_;
  std::size_t window_;
  std::mt19937_64 rng_;
};

// epoch,mean_objective
std::string loss_history_csv(const std::vector<double>& history);

}  // namespace nae
