#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nae/audio.hpp"
#include "nae/ops.hpp"
#include "nae/tensor.hpp"

namespace nae {

struct ModelConfig {
  int sample_rate = 16000;
  std::size_t frontend_filters = 256;
  std::size_t frontend_width = 64;
  std::size_t frontend_stride = 32;
  std::vector<std::size_t> encoder_channels = {128, 64};
  std::size_t kernel_width = 5;
  std::size_t latent_dim = 64;
  std::uint64_t seed = 0;
  // Source label carried in checkpoints; separation outputs are named after it.
  std::string name = "source";

  // Small network used for desk-scale experiments and tests.
  static ModelConfig tiny();

  // Throws ConfigError on zero sizes, latent_dim != last encoder width, an even
  // kernel width, or (frontend_width - frontend_stride) odd or negative.
  void validate() const;

  // Symmetric zero padding that makes the front end emit ceil(L / stride) frames.
  std::size_t frontend_pad() const { return (frontend_width - frontend_stride) / 2; }
  std::size_t kernel_pad() const { return (kernel_width - 1) / 2; }
  std::size_t frames(std::size_t samples) const {
    return (samples + frontend_stride - 1) / frontend_stride;
  }
  // Channel widths of the decoder stack: the encoder widths mirrored, ending at
  // the front-end filter count.
  std::vector<std::size_t> decoder_channels() const;

  bool operator==(const ModelConfig&) const = default;
};

// Non-negative latent matrix [latent_dim x frames] for one source.
struct Activations {
  Tensor matrix;

  std::size_t latent_dim() const { return matrix.dim(0); }
  std::size_t frames() const { return matrix.dim(1); }
};

struct ConvLayer {
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct NormLayer {
  Tensor gamma;
  Tensor beta;
  BatchNormState state;
};

Tensor waveform_tensor(const Waveform& w, bool requires_grad = false);
Waveform tensor_waveform(const Tensor& t, int sample_rate);

// Per-source end-to-end non-negative autoencoder.
//
//   front end   conv1d(1 -> F, width W, stride S) + softplus
//   encoder     conv1d(k = kernel_width, stride 1) + batchnorm + softplus, per layer
//   decoder     tconv1d mirror of the encoder, same per-layer structure
//   back end    tconv1d(F -> 1, width W, stride S), cropped to the input length
//
// Inputs shorter than a multiple of S are zero-padded on the right, so an
// L-sample input yields ceil(L / S) activation frames.
//
// Copies share parameter storage; clone() makes an independent model.
class EndToEndNae {
 public:
  static EndToEndNae build(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  // wave is [1 x L]. Train mode updates batch-norm running statistics.
  Tensor encode(Tape& tape, const Tensor& wave, NormMode mode);
  Tensor encode(Tape& tape, const Tensor& wave) const;
  // activations [latent_dim x frames] -> [1 x frames * stride], uncropped.
  Tensor decode(Tape& tape, const Tensor& activations, NormMode mode);
  Tensor decode(Tape& tape, const Tensor& activations) const;
  // decode(encode(wave)) cropped to the input length.
  Tensor forward(Tape& tape, const Tensor& wave, NormMode mode);
  Tensor forward(Tape& tape, const Tensor& wave) const;

  // Frozen-statistics conveniences without gradient tracking.
  Activations encode(const Waveform& x) const;
  Waveform decode(const Activations& h) const;
  Waveform forward(const Waveform& x) const;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::size_t param_count() const;

  std::vector<std::pair<std::string, BatchNormState*>> norm_states();
  std::vector<std::pair<std::string, const BatchNormState*>> norm_states() const;

  void set_trainable(bool trainable);
  void zero_grad() const;
  EndToEndNae clone() const;

 private:
  template <class Self>
  static Tensor encode_impl(Self& self, Tape& tape, const Tensor& wave, NormMode mode);
  template <class Self>
  static Tensor decode_impl(Self& self, Tape& tape, const Tensor& activations, NormMode mode);
  void check_input(const Tensor& wave) const;

  ModelConfig config_;
  ConvLayer front_;
  std::vector<ConvLayer> encoder_;
  std::vector<NormLayer> encoder_norm_;
  std::vector<ConvLayer> decoder_;
  std::vector<NormLayer> decoder_norm_;
  ConvLayer back_;
};

// Checkpoint container:
//   "NAE1" | u32 version | config block | u32 entry count |
//   entries of (u32 name length, name, u32 rank, u64 dims..., f64 values...)
// All integers and doubles little-endian. Entries hold trainable parameters and
// batch-norm running statistics.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize(const EndToEndNae& model);
EndToEndNae deserialize(std::string_view bytes);
void save(const EndToEndNae& model, const std::filesystem::path& path);
EndToEndNae load(const std::filesystem::path& path);

}  // namespace nae
