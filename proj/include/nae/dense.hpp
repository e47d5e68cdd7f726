#pragma once

#include <cstdint>
#include <vector>

#include "nae/tensor.hpp"

namespace nae {

// Two-layer non-negative autoencoder on a non-negative matrix S [M x N]:
//   H = softplus(W_enc S),  S_hat = softplus(W_dec H)
// W_dec plays the role of NMF bases and H of NMF activations.
struct DenseNae {
  Tensor encoder_weights;  // [K x M]
  Tensor decoder_weights;  // [M x K]

  static DenseNae build(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed);
  std::size_t input_dim() const { return decoder_weights.dim(0); }
  std::size_t latent_dim() const { return decoder_weights.dim(1); }
};

struct DenseOutput {
  Tensor activations;     // [K x N]
  Tensor reconstruction;  // [M x N]
};

DenseOutput dense_forward(Tape& tape, const DenseNae& model, const Tensor& spectrogram);
DenseOutput dense_forward(const DenseNae& model, const Tensor& spectrogram);

struct DenseTrainConfig {
  std::size_t iterations = 3000;
  double learning_rate = 1e-2;
  // Weight on mean(H); zero disables the sparsity penalty.
  double l1_activation_weight = 0.0;
};

// Adam on the squared reconstruction error ||S_hat - S||_F^2. Returns the loss
// before every update.
std::vector<double> train_dense(DenseNae& model, const Tensor& spectrogram,
                                const DenseTrainConfig& config);

struct NmfResult {
  Tensor bases;        // W [M x rank]
  Tensor activations;  // H [rank x N]
  // ||S - W H||_F^2 at initialization and after every iteration.
  std::vector<double> loss_history;
};

// Lee-Seung multiplicative updates for the Euclidean NMF objective.
NmfResult nmf_oracle(const Tensor& spectrogram, std::size_t rank, std::size_t iterations,
                     std::uint64_t seed);

// ||S - approx||_F / ||S||_F.
double relative_error(const Tensor& target, const Tensor& approx);

}  // namespace nae
