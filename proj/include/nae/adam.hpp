#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nae/tensor.hpp"

namespace nae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments mirror the parameter list they were first used with.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// Bias-corrected Adam update from the gradients currently stored in `params`.
// Gradients are left untouched; callers zero them.
void adam_step(std::span<const Tensor> params, AdamState& state, const AdamConfig& config);

}  // namespace nae
