#include "nae/selfcheck.hpp"

#include <random>

#include "nae/dense.hpp"
#include "nae/gradcheck.hpp"
#include "nae/model.hpp"
#include "nae/ops.hpp"

namespace nae {
namespace {

constexpr double kStep = 1e-5;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = g(rng);
  return t;
}

// Linear probe turning a tensor-valued op into a scalar: <op(...), probe>.
ScalarFunction probed(std::function<Tensor(Tape&)> op, Tensor probe) {
  return [op = std::move(op), probe](Tape& tape) { return inner_product(tape, op(tape), probe); };
}

ModelConfig gradcheck_config() {
  ModelConfig c;
  c.frontend_filters = 3;
  c.frontend_width = 8;
  c.frontend_stride = 4;
  c.encoder_channels = {3, 2};
  c.kernel_width = 3;
  c.latent_dim = 2;
  c.seed = 11;
  return c;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckEntry> out;

  {
    const Tensor x = random_tensor({2, 11}, rng), k = random_tensor({3, 2, 4}, rng),
                 b = random_tensor({3}, rng);
    const Tensor probe = random_tensor({3, conv1d_output_length(11, 4, 2, 1)}, rng);
    const std::vector<Tensor> in{x, k, b};
    out.push_back({"conv1d", grad_check(probed([=](Tape& t) { return conv1d(t, x, k, b, 2, 1); }, probe),
                                        in, kStep)});
  }
  {
    const Tensor x = random_tensor({3, 5}, rng), k = random_tensor({3, 2, 4}, rng),
                 b = random_tensor({2}, rng);
    const Tensor probe = random_tensor({2, tconv1d_output_length(5, 4, 2, 1)}, rng);
    const std::vector<Tensor> in{x, k, b};
    out.push_back({"tconv1d", grad_check(probed([=](Tape& t) { return tconv1d(t, x, k, b, 2, 1); }, probe),
                                         in, kStep)});
  }
  {
    const Tensor x = random_tensor({4, 6}, rng, 3.0);
    out.push_back({"softplus", grad_check([=](Tape& t) { return sum(t, softplus(t, x)); }, x, kStep)});
  }
  {
    const Tensor x = random_tensor({3, 7}, rng), g = random_tensor({3}, rng), b = random_tensor({3}, rng);
    const Tensor probe = random_tensor({3, 7}, rng);
    auto state = std::make_shared<BatchNormState>(3);
    const std::vector<Tensor> in{x, g, b};
    out.push_back({"batchnorm1d(train)",
                   grad_check(probed([=](Tape& t) {
                                return batchnorm1d(t, x, g, b, *state, NormMode::train);
                              }, probe),
                              in, kStep)});
  }
  {
    const Tensor x = random_tensor({3, 7}, rng), g = random_tensor({3}, rng), b = random_tensor({3}, rng);
    const Tensor probe = random_tensor({3, 7}, rng);
    BatchNormState state(3);
    std::uniform_real_distribution<double> pos(0.5, 2.0);
    for (auto& m : state.running_mean) m = pos(rng) - 1.0;
    for (auto& v : state.running_var) v = pos(rng);
    const std::vector<Tensor> in{x, g, b};
    out.push_back({"batchnorm1d(frozen)",
                   grad_check(probed([=](Tape& t) { return batchnorm1d(t, x, g, b, state); }, probe),
                              in, kStep)});
  }
  {
    const Tensor x = random_tensor({1, 9}, rng), y = random_tensor({1, 9}, rng);
    const std::vector<Tensor> in{x, y};
    out.push_back({"inner_product", grad_check([=](Tape& t) { return inner_product(t, x, y); }, in, kStep)});
  }
  {
    const Tensor y = random_tensor({1, 12}, rng);
    Tensor x = y.clone();
    std::normal_distribution<double> g(0.0, 0.5);
    for (double& v : x.values()) v += g(rng);
    const std::vector<Tensor> in{x, y};
    out.push_back({"sdr_objective", grad_check([=](Tape& t) { return sdr_objective(t, x, y); }, in, kStep)});
  }
  {
    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    const Tensor probe = random_tensor({3, 5}, rng);
    const std::vector<Tensor> in{a, b};
    out.push_back({"matmul", grad_check(probed([=](Tape& t) { return matmul(t, a, b); }, probe), in, kStep)});
  }
  {
    const Tensor a = random_tensor({2, 6}, rng), b = random_tensor({2, 6}, rng);
    const Tensor probe = random_tensor({2, 4}, rng);
    const std::vector<Tensor> in{a, b};
    out.push_back({"add/sub/scale/slice",
                   grad_check(probed([=](Tape& t) {
                                return slice_last(t, scale(t, sub(t, add(t, a, b), scale(t, b, 0.5)), 1.5), 3, 4);
                              }, probe),
                              in, kStep)});
  }
  {
    DenseNae dense = DenseNae::build(5, 2, seed);
    Tensor s = random_tensor({5, 4}, rng);
    for (double& v : s.values()) v = std::abs(v);
    const std::vector<Tensor> in{dense.encoder_weights, dense.decoder_weights};
    out.push_back({"dense_nae", grad_check([=](Tape& t) {
                                  const auto o = dense_forward(t, dense, s);
                                  const Tensor d = sub(t, o.reconstruction, s);
                                  return inner_product(t, d, d);
                                }, in, kStep)});
  }

  // Composite: end-to-end model forward + objective, all parameters and the input.
  {
    auto model = std::make_shared<EndToEndNae>(EndToEndNae::build(gradcheck_config()));
    const Tensor x = random_tensor({1, 30}, rng, 0.5);
    const Tensor y = random_tensor({1, 30}, rng, 0.5);
    std::vector<Tensor> in = model->parameters();
    in.push_back(x);
    out.push_back({"end_to_end_nae(train)", grad_check([=](Tape& t) {
                                              return sdr_objective(t, model->forward(t, x, NormMode::train), y);
                                            }, in, kStep)});
    out.push_back({"end_to_end_nae(frozen)", grad_check([=](Tape& t) {
                                               const EndToEndNae& m = *model;
                                               return sdr_objective(t, m.forward(t, x), y);
                                             }, in, kStep)});
    const Tensor z = random_tensor({2, 8}, rng);
    out.push_back({"decoder_inference", grad_check([=](Tape& t) {
                                          const EndToEndNae& m = *model;
                                          const Tensor h = softplus(t, z);
                                          return sdr_objective(t, slice_last(t, m.decode(t, h), 0, 30), y);
                                        }, z, kStep)});
  }
  return out;
}

}  // namespace nae
