#include "nae/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "nae/errors.hpp"

namespace nae {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.values().data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

MatMap grad_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.grad().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

bool any_requires_grad(std::initializer_list<const Tensor*> tensors) {
  for (const Tensor* t : tensors) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + (t.defined() ? shape_str(t.shape()) : "undefined"));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

// cols(c * width + k, f) = signal[c, f * stride + k - pad], zero outside [0, length).
RowMat im2col(std::span<const double> signal, std::size_t channels, std::size_t length,
              std::size_t width, std::size_t stride, std::size_t pad, std::size_t frames) {
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(channels * width),
                             static_cast<Eigen::Index>(frames));
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = signal.data() + c * length;
    for (std::size_t k = 0; k < width; ++k) {
      double* row = cols.data() + (c * width + k) * frames;
      for (std::size_t f = 0; f < frames; ++f) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(f * stride + k) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) row[f] = src[pos];
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add columns back onto a [channels x length] signal.
void col2im_add(const RowMat& cols, std::span<double> signal, std::size_t channels,
                std::size_t length, std::size_t width, std::size_t stride, std::size_t pad,
                std::size_t frames) {
  for (std::size_t c = 0; c < channels; ++c) {
    double* dst = signal.data() + c * length;
    for (std::size_t k = 0; k < width; ++k) {
      const double* row = cols.data() + (c * width + k) * frames;
      for (std::size_t f = 0; f < frames; ++f) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(f * stride + k) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) dst[pos] += row[f];
      }
    }
  }
}

void add_bias(Tensor& out, const Tensor& bias, std::size_t channels, std::size_t length) {
  if (!bias.defined()) return;
  auto v = out.values();
  auto b = bias.values();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < length; ++i) v[c * length + i] += b[c];
  }
}

void accumulate_bias_grad(Tensor bias, const Tensor& out, std::size_t channels,
                          std::size_t length) {
  if (!bias.defined() || !bias.requires_grad()) return;
  auto db = bias.grad();
  auto g = out.grad();
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < length; ++i) acc += g[c * length + i];
    db[c] += acc;
  }
}

void check_bias(const Tensor& bias, std::size_t channels, const char* what) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw DimensionError(std::string(what) + ": bias shape " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(channels) + " output channels");
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t width, std::size_t stride,
                                 std::size_t pad) {
  if (stride == 0) throw ContractError("conv1d: stride must be >= 1");
  if (length + 2 * pad < width) {
    throw ContractError("conv1d: padded length " + std::to_string(length + 2 * pad) +
                        " shorter than kernel width " + std::to_string(width));
  }
  return (length + 2 * pad - width) / stride + 1;
}

std::size_t tconv1d_output_length(std::size_t frames, std::size_t width, std::size_t stride,
                                  std::size_t pad) {
  if (stride == 0) throw ContractError("tconv1d: stride must be >= 1");
  if (frames == 0) throw ContractError("tconv1d: need at least one input frame");
  const std::size_t full = (frames - 1) * stride + width;
  if (full <= 2 * pad) throw ContractError("tconv1d: padding consumes the whole output");
  return full - 2 * pad;
}

Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t pad) {
  require_rank(input, 2, "conv1d input");
  require_rank(kernels, 3, "conv1d kernels");
  const std::size_t c_in = input.dim(0), length = input.dim(1);
  const std::size_t c_out = kernels.dim(0), width = kernels.dim(2);
  if (kernels.dim(1) != c_in) {
    throw DimensionError("conv1d: kernels expect " + std::to_string(kernels.dim(1)) +
                         " input channels, input has " + std::to_string(c_in));
  }
  check_bias(bias, c_out, "conv1d");
  const std::size_t frames = conv1d_output_length(length, width, stride, pad);

  const RowMat cols = im2col(input.values(), c_in, length, width, stride, pad, frames);
  Tensor out({c_out, frames});
  MatMap(out.values().data(), c_out, frames).noalias() =
      as_matrix(kernels, c_out, c_in * width) * cols;
  add_bias(out, bias, c_out, frames);

  if (any_requires_grad({&input, &kernels, &bias})) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      const ConstMatMap g(out.grad().data(), c_out, frames);
      if (kernels.requires_grad()) {
        const RowMat recomputed = im2col(input.values(), c_in, length, width, stride, pad, frames);
        grad_matrix(kernels, c_out, c_in * width).noalias() += g * recomputed.transpose();
      }
      accumulate_bias_grad(bias, out, c_out, frames);
      if (input.requires_grad()) {
        const RowMat dcols = as_matrix(kernels, c_out, c_in * width).transpose() * g;
        col2im_add(dcols, input.grad(), c_in, length, width, stride, pad, frames);
      }
    });
  }
  return out;
}

Tensor tconv1d(Tape& tape, const Tensor& input, const Tensor& kernels, const Tensor& bias,
               std::size_t stride, std::size_t pad) {
  require_rank(input, 2, "tconv1d input");
  require_rank(kernels, 3, "tconv1d kernels");
  const std::size_t c_in = input.dim(0), frames = input.dim(1);
  const std::size_t c_out = kernels.dim(1), width = kernels.dim(2);
  if (kernels.dim(0) != c_in) {
    throw DimensionError("tconv1d: kernels expect " + std::to_string(kernels.dim(0)) +
                         " input channels, input has " + std::to_string(c_in));
  }
  check_bias(bias, c_out, "tconv1d");
  const std::size_t length = tconv1d_output_length(frames, width, stride, pad);

  const RowMat cols =
      as_matrix(kernels, c_in, c_out * width).transpose() * as_matrix(input, c_in, frames);
  Tensor out({c_out, length});
  col2im_add(cols, out.values(), c_out, length, width, stride, pad, frames);
  add_bias(out, bias, c_out, length);

  if (any_requires_grad({&input, &kernels, &bias})) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      const RowMat dcols = im2col(out.grad(), c_out, length, width, stride, pad, frames);
      if (input.requires_grad()) {
        grad_matrix(input, c_in, frames).noalias() +=
            as_matrix(kernels, c_in, c_out * width) * dcols;
      }
      if (kernels.requires_grad()) {
        grad_matrix(kernels, c_in, c_out * width).noalias() +=
            as_matrix(input, c_in, frames) * dcols.transpose();
      }
      accumulate_bias_grad(bias, out, c_out, length);
    });
  }
  return out;
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0)) throw ContractError("softplus_inverse: argument must be positive");
  return y + std::log(-std::expm1(-y));
}

Tensor softplus(Tape& tape, const Tensor& input) {
  Tensor out(input.shape());
  auto x = input.values();
  auto y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = softplus(x[i]);
  if (input.requires_grad()) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      auto gx = input.grad();
      auto xv = input.values();
      auto g = out.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * sigmoid(xv[i]);
    });
  }
  return out;
}

namespace {

// `update` is non-null in train mode.
Tensor batchnorm_impl(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                      const BatchNormState& state, BatchNormState* update) {
  const NormMode mode = update ? NormMode::train : NormMode::frozen;
  require_rank(input, 2, "batchnorm1d input");
  const std::size_t channels = input.dim(0), frames = input.dim(1);
  if (frames == 0) throw ContractError("batchnorm1d: need at least one frame");
  if (gamma.size() != channels || beta.size() != channels ||
      state.running_mean.size() != channels || state.running_var.size() != channels) {
    throw DimensionError("batchnorm1d: parameter size does not match " +
                         std::to_string(channels) + " channels");
  }

  std::vector<double> inv_std(channels);
  std::vector<double> xhat(input.size());
  auto x = input.values();
  for (std::size_t c = 0; c < channels; ++c) {
    const double* row = x.data() + c * frames;
    double mean, var;
    if (mode == NormMode::train) {
      mean = 0.0;
      for (std::size_t f = 0; f < frames; ++f) mean += row[f];
      mean /= static_cast<double>(frames);
      var = 0.0;
      for (std::size_t f = 0; f < frames; ++f) var += (row[f] - mean) * (row[f] - mean);
      var /= static_cast<double>(frames);
      const double unbiased = frames > 1 ? var * frames / (frames - 1.0) : var;
      const double m = update->momentum;
      update->running_mean[c] = (1.0 - m) * update->running_mean[c] + m * mean;
      update->running_var[c] = (1.0 - m) * update->running_var[c] + m * unbiased;
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + state.eps);
    for (std::size_t f = 0; f < frames; ++f) xhat[c * frames + f] = (row[f] - mean) * inv_std[c];
  }

  Tensor out(input.shape());
  auto y = out.values();
  auto gm = gamma.values();
  auto bt = beta.values();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t f = 0; f < frames; ++f) {
      y[c * frames + f] = gm[c] * xhat[c * frames + f] + bt[c];
    }
  }

  if (any_requires_grad({&input, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape.record(out, [=, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
      auto g = out.grad();
      auto gm = gamma.values();
      for (std::size_t c = 0; c < channels; ++c) {
        const double* gr = g.data() + c * frames;
        const double* xh = xhat.data() + c * frames;
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t f = 0; f < frames; ++f) {
          sum_g += gr[f];
          sum_gx += gr[f] * xh[f];
        }
        if (gamma.requires_grad()) gamma.grad()[c] += sum_gx;
        if (beta.requires_grad()) beta.grad()[c] += sum_g;
        if (!input.requires_grad()) continue;
        double* dx = input.grad().data() + c * frames;
        const double k = gm[c] * inv_std[c];
        if (mode == NormMode::train) {
          const double n = static_cast<double>(frames);
          for (std::size_t f = 0; f < frames; ++f) {
            dx[f] += k * (gr[f] - sum_g / n - xh[f] * sum_gx / n);
          }
        } else {
          for (std::size_t f = 0; f < frames; ++f) dx[f] += k * gr[f];
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor batchnorm1d(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, NormMode mode) {
  return batchnorm_impl(tape, input, gamma, beta, state,
                        mode == NormMode::train ? &state : nullptr);
}

Tensor batchnorm1d(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   const BatchNormState& state) {
  return batchnorm_impl(tape, input, gamma, beta, state, nullptr);
}

Tensor inner_product(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "inner_product");
  auto xv = x.values();
  auto yv = y.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * yv[i];
  Tensor out = Tensor::scalar(acc);
  if (any_requires_grad({&x, &y})) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      const double g = out.grad()[0];
      if (x.requires_grad()) {
        auto gx = x.grad();
        auto yv = y.values();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * yv[i];
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        auto xv = x.values();
        for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g * xv[i];
      }
    });
  }
  return out;
}

Tensor sdr_objective(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "sdr_objective");
  auto xv = x.values();
  auto yv = y.values();
  double cross = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    cross += xv[i] * yv[i];
    energy += xv[i] * xv[i];
  }
  const double denom = energy + kSdrDenominatorEps;
  const double ratio = cross * cross / denom;
  const bool floored = !(ratio > std::exp(kSdrObjectiveFloor));
  const double value = floored ? kSdrObjectiveFloor : 2.0 * std::log(std::abs(cross)) - std::log(denom);

  Tensor out = Tensor::scalar(value);
  if (any_requires_grad({&x, &y})) {
    out.set_requires_grad(true);
    if (floored) {
      tape.record(out, [] {});
      return out;
    }
    tape.record(out, [=]() mutable {
      const double g = out.grad()[0];
      auto xv = x.values();
      auto yv = y.values();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) {
          gx[i] += g * (2.0 * yv[i] / cross - 2.0 * xv[i] / denom);
        }
      }
      if (y.requires_grad()) {
        auto gy = y.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g * 2.0 * xv[i] / cross;
      }
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  Tensor out({m, n});
  MatMap(out.values().data(), m, n).noalias() = as_matrix(a, m, k) * as_matrix(b, k, n);
  if (any_requires_grad({&a, &b})) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      const ConstMatMap g(out.grad().data(), m, n);
      if (a.requires_grad()) grad_matrix(a, m, k).noalias() += g * as_matrix(b, k, n).transpose();
      if (b.requires_grad()) grad_matrix(b, k, n).noalias() += as_matrix(a, m, k).transpose() * g;
    });
  }
  return out;
}

namespace {

Tensor axpby(Tape& tape, const Tensor& a, const Tensor& b, double sign_b, const char* what) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + sign_b * bv[i];
  if (any_requires_grad({&a, &b})) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign_b * g[i];
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return axpby(tape, a, b, 1.0, "add"); }

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return axpby(tape, a, b, -1.0, "sub"); }

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  Tensor out(a.shape());
  auto av = a.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * av[i];
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      auto g = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      const double g = out.grad()[0];
      for (double& ga : a.grad()) ga += g;
    });
  }
  return out;
}

Tensor slice_last(Tape& tape, const Tensor& input, std::size_t begin, std::size_t length) {
  require_rank(input, 2, "slice_last input");
  const std::size_t channels = input.dim(0), in_len = input.dim(1);
  Tensor out({channels, length});
  auto x = input.values();
  auto y = out.values();
  const std::size_t avail = begin < in_len ? std::min(length, in_len - begin) : 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < avail; ++j) y[c * length + j] = x[c * in_len + begin + j];
  }
  if (input.requires_grad()) {
    out.set_requires_grad(true);
    tape.record(out, [=]() mutable {
      auto g = out.grad();
      auto gx = input.grad();
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t j = 0; j < avail; ++j) gx[c * in_len + begin + j] += g[c * length + j];
      }
    });
  }
  return out;
}

}  // namespace nae
