#include "nae/adam.hpp"

#include <cmath>

#include "nae/errors.hpp"

namespace nae {

void adam_step(std::span<const Tensor> params, AdamState& state, const AdamConfig& config) {
  if (state.step == 0 && state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: parameter list changed between steps");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != p.size()) throw ContractError("adam_step: parameter shape changed");
    auto values = p.values();
    auto grad = p.grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      values[j] -= config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
    }
  }
}

}  // namespace nae
