#include "nae/dense.hpp"

#include <Eigen/Core>
#include <cmath>
#include <random>

#include "nae/adam.hpp"
#include "nae/errors.hpp"
#include "nae/ops.hpp"

namespace nae {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_nonnegative(const Tensor& s, const char* what) {
  for (double v : s.values()) {
    if (!(v >= 0)) throw ContractError(std::string(what) + ": input has a negative or NaN entry");
  }
}

}  // namespace

DenseNae DenseNae::build(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed) {
  if (input_dim == 0 || latent_dim == 0) throw ConfigError("DenseNae sizes must be >= 1");
  std::mt19937_64 rng(seed);
  DenseNae m{Tensor({latent_dim, input_dim}, true), Tensor({input_dim, latent_dim}, true)};
  std::uniform_real_distribution<double> enc(-1.0 / std::sqrt(static_cast<double>(input_dim)),
                                             1.0 / std::sqrt(static_cast<double>(input_dim)));
  std::uniform_real_distribution<double> dec(-1.0 / std::sqrt(static_cast<double>(latent_dim)),
                                             1.0 / std::sqrt(static_cast<double>(latent_dim)));
  for (double& v : m.encoder_weights.values()) v = enc(rng);
  for (double& v : m.decoder_weights.values()) v = dec(rng);
  return m;
}

DenseOutput dense_forward(Tape& tape, const DenseNae& model, const Tensor& spectrogram) {
  require_nonnegative(spectrogram, "dense_forward");
  DenseOutput out;
  out.activations = softplus(tape, matmul(tape, model.encoder_weights, spectrogram));
  out.reconstruction = softplus(tape, matmul(tape, model.decoder_weights, out.activations));
  return out;
}

DenseOutput dense_forward(const DenseNae& model, const Tensor& spectrogram) {
  Tape tape;
  return dense_forward(tape, model, spectrogram);
}

std::vector<double> train_dense(DenseNae& model, const Tensor& spectrogram,
                                const DenseTrainConfig& config) {
  require_nonnegative(spectrogram, "train_dense");
  const std::vector<Tensor> params{model.encoder_weights, model.decoder_weights};
  AdamState state;
  const AdamConfig adam{config.learning_rate};
  std::vector<double> history;
  history.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    Tape tape;
    const DenseOutput out = dense_forward(tape, model, spectrogram);
    const Tensor diff = sub(tape, out.reconstruction, spectrogram);
    Tensor loss = inner_product(tape, diff, diff);
    history.push_back(loss.item());
    if (config.l1_activation_weight > 0) {
      const double w = config.l1_activation_weight / static_cast<double>(out.activations.size());
      loss = add(tape, loss, scale(tape, sum(tape, out.activations), w));
    }
    tape.backward(loss);
    adam_step(params, state, adam);
    for (const auto& p : params) p.zero_grad();
  }
  return history;
}

NmfResult nmf_oracle(const Tensor& spectrogram, std::size_t rank, std::size_t iterations,
                     std::uint64_t seed) {
  if (spectrogram.rank() != 2) throw DimensionError("nmf_oracle: expected a matrix");
  if (rank == 0) throw ContractError("nmf_oracle: rank must be >= 1");
  require_nonnegative(spectrogram, "nmf_oracle");
  const auto m = static_cast<Eigen::Index>(spectrogram.dim(0));
  const auto n = static_cast<Eigen::Index>(spectrogram.dim(1));
  const auto k = static_cast<Eigen::Index>(rank);
  const Eigen::Map<const RowMat> s(spectrogram.values().data(), m, n);

  std::mt19937_64 rng(seed);
  const double level = std::sqrt(std::max(s.mean(), 1e-12) / static_cast<double>(rank));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RowMat w(m, k), h(k, n);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = level * (0.1 + u(rng));
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = level * (0.1 + u(rng));

  constexpr double kGuard = 1e-300;
  NmfResult result;
  auto loss = [&] { return (s - w * h).squaredNorm(); };
  result.loss_history.push_back(loss());
  for (std::size_t it = 0; it < iterations; ++it) {
    const RowMat wt_s = w.transpose() * s;
    const RowMat wt_w_h = (w.transpose() * w) * h;
    h = h.cwiseProduct(wt_s.cwiseQuotient(wt_w_h.array().max(kGuard).matrix()));
    const RowMat s_ht = s * h.transpose();
    const RowMat w_h_ht = w * (h * h.transpose());
    w = w.cwiseProduct(s_ht.cwiseQuotient(w_h_ht.array().max(kGuard).matrix()));
    result.loss_history.push_back(loss());
  }
  result.bases = Tensor({spectrogram.dim(0), rank}, std::vector<double>(w.data(), w.data() + w.size()));
  result.activations =
      Tensor({rank, spectrogram.dim(1)}, std::vector<double>(h.data(), h.data() + h.size()));
  return result;
}

double relative_error(const Tensor& target, const Tensor& approx) {
  if (target.shape() != approx.shape()) throw DimensionError("relative_error: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target.values()[i] - approx.values()[i];
    num += d * d;
    den += target.values()[i] * target.values()[i];
  }
  return std::sqrt(num / den);
}

}  // namespace nae
