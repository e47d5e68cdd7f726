#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nae/audio.hpp"
#include "nae/model.hpp"

namespace nae {

enum class InferenceMode {
  decoder_only,  // optimize per-source activations fed to frozen decoders
  full_model,    // optimize per-source waveforms fed through frozen models
};

enum class InitStrategy { encoder_warm_start, random, uniform_split };

InferenceMode parse_inference_mode(std::string_view name);
std::string_view to_string(InferenceMode mode);
InitStrategy parse_init_strategy(std::string_view name);

struct InferenceConfig {
  InferenceMode mode = InferenceMode::decoder_only;
  std::size_t iterations = 1000;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  // Unset: encoder_warm_start for decoder_only, uniform_split for full_model.
  std::optional<InitStrategy> init;
  // Mixtures longer than this are separated in consecutive windows; 0 disables.
  std::size_t window_samples = 0;

  InitStrategy effective_init() const;
  void validate() const;
};

// Ordered collection of pre-trained source models.
class SourceDict {
 public:
  void add(std::string name, EndToEndNae model);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& name(std::size_t i) const { return entries_.at(i).first; }
  const EndToEndNae& model(std::size_t i) const { return entries_.at(i).second; }
  int sample_rate() const;

 private:
  std::vector<std::pair<std::string, EndToEndNae>> entries_;
};

// Free variables of the inference network, one tensor per source:
//   decoder_only  Z_i [latent_dim x frames], activations H_i = softplus(Z_i)
//   full_model    s_i [1 x L], the source waveform fed to model i
struct InferenceVariables {
  InferenceMode mode = InferenceMode::decoder_only;
  std::vector<Tensor> per_source;

  std::size_t count() const;
};

InferenceVariables init_variables(const Waveform& mixture, const SourceDict& dict,
                                  const InferenceConfig& config);

struct SeparationResult {
  std::vector<std::string> names;
  std::vector<Waveform> estimates;  // dict order, each the mixture's length
  // sdr_objective of the summed estimates, one entry per evaluation: the
  // initial point, then after every update.
  std::vector<double> objective_history;
  bool silent_mixture = false;
};

// Fits the frozen models in `dict` to the mixture by maximizing
// sdr_objective(sum_i s_hat_i, mixture) over the inference variables only.
// Returns the estimates at the best objective reached.
SeparationResult separate(const Waveform& mixture, const SourceDict& dict,
                          const InferenceConfig& config);

// Number of free inference variables: sum_i latent_i * ceil(L / stride_i) in
// decoder mode, K * L in full-model mode.
std::size_t inference_param_count(std::size_t mixture_len, const SourceDict& dict,
                                  InferenceMode mode);

// iteration,objective
std::string objective_history_csv(const std::vector<double>& history);

}  // namespace nae
