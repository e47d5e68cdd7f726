#pragma once

#include <cstddef>
#include <vector>

#include "nae/tensor.hpp"

namespace nae {

// Differentiable kernels. Every op takes the tape it records on; an op whose
// inputs all have requires_grad == false is evaluated but not recorded.

// input [C_in x L], kernels [C_out x C_in x w], bias [C_out] (may be undefined).
// Output [C_out x F], F = floor((L + 2 pad - w) / stride) + 1.
Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t pad);

// input [C_in x F], kernels [C_in x C_out x w], bias [C_out] (may be undefined).
// Output [C_out x L'], L' = (F - 1) stride + w - 2 pad. With zero bias this is
// the exact adjoint of conv1d using the same kernel array.
Tensor tconv1d(Tape& tape, const Tensor& input, const Tensor& kernels, const Tensor& bias,
               std::size_t stride, std::size_t pad);

std::size_t conv1d_output_length(std::size_t length, std::size_t width, std::size_t stride,
                                 std::size_t pad);
std::size_t tconv1d_output_length(std::size_t frames, std::size_t width, std::size_t stride,
                                  std::size_t pad);

// log(1 + exp(x)), overflow safe.
double softplus(double x);
// Inverse of softplus for y > 0.
double softplus_inverse(double y);
Tensor softplus(Tape& tape, const Tensor& input);

enum class NormMode { train, frozen };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

// Per-channel normalization over the frame axis of a [C x F] tensor. Train mode
// uses the batch statistics and updates `state`; frozen mode reads it only.
Tensor batchnorm1d(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, NormMode mode);
// Frozen mode on read-only statistics.
Tensor batchnorm1d(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   const BatchNormState& state);

Tensor inner_product(Tape& tape, const Tensor& x, const Tensor& y);

inline constexpr double kSdrDenominatorEps = 1e-8;
// Objective value returned when the ratio underflows (estimate orthogonal to
// the reference, or silent). Its gradient is zero.
inline constexpr double kSdrObjectiveFloor = -46.0517018598809;  // log(1e-20)

// log(<x,y>^2 / (<x,x> + eps)): log of the simplified SDR ratio.
Tensor sdr_objective(Tape& tape, const Tensor& x, const Tensor& y);

// a [M x K] times b [K x N].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor sum(Tape& tape, const Tensor& a);

// Window [begin, begin + length) of the last axis of a [C x L] tensor; positions
// past the end read as zero. Used for both cropping and right padding.
Tensor slice_last(Tape& tape, const Tensor& input, std::size_t begin, std::size_t length);

}  // namespace nae
