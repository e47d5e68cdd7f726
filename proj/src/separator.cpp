#include "nae/separator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "nae/adam.hpp"
#include "nae/errors.hpp"
#include "nae/ops.hpp"

namespace nae {

InferenceMode parse_inference_mode(std::string_view name) {
  if (name == "decoder" || name == "decoder_only") return InferenceMode::decoder_only;
  if (name == "full" || name == "full_model") return InferenceMode::full_model;
  throw ConfigError("unknown inference mode '" + std::string(name) + "'");
}

std::string_view to_string(InferenceMode mode) {
  return mode == InferenceMode::decoder_only ? "decoder_only" : "full_model";
}

InitStrategy parse_init_strategy(std::string_view name) {
  if (name == "encoder_warm_start" || name == "warm") return InitStrategy::encoder_warm_start;
  if (name == "random") return InitStrategy::random;
  if (name == "uniform_split" || name == "split") return InitStrategy::uniform_split;
  throw ConfigError("unknown init strategy '" + std::string(name) + "'");
}

InitStrategy InferenceConfig::effective_init() const {
  if (init) return *init;
  return mode == InferenceMode::decoder_only ? InitStrategy::encoder_warm_start
                                             : InitStrategy::uniform_split;
}

void InferenceConfig::validate() const {
  if (iterations == 0) throw ConfigError("iterations must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
}

void SourceDict::add(std::string name, EndToEndNae model) {
  for (const auto& [existing, m] : entries_) {
    if (existing == name) throw ContractError("duplicate source name '" + name + "'");
  }
  if (!entries_.empty() && model.config().sample_rate != sample_rate()) {
    throw ContractError("source '" + name + "' runs at " +
                        std::to_string(model.config().sample_rate) + " Hz, dictionary at " +
                        std::to_string(sample_rate()) + " Hz");
  }
  entries_.emplace_back(std::move(name), std::move(model));
}

int SourceDict::sample_rate() const {
  if (entries_.empty()) throw ContractError("empty source dictionary");
  return entries_.front().second.config().sample_rate;
}

std::size_t InferenceVariables::count() const {
  std::size_t n = 0;
  for (const auto& t : per_source) n += t.size();
  return n;
}

std::size_t inference_param_count(std::size_t mixture_len, const SourceDict& dict,
                                  InferenceMode mode) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const auto& c = dict.model(i).config();
    n += mode == InferenceMode::decoder_only ? c.latent_dim * c.frames(mixture_len) : mixture_len;
  }
  return n;
}

namespace {

constexpr double kMinWarmActivation = 1e-12;

void check_inputs(const Waveform& mixture, const SourceDict& dict) {
  if (dict.empty()) throw ContractError("separate: empty source dictionary");
  if (mixture.sample_rate != dict.sample_rate()) {
    throw ContractError("mixture at " + std::to_string(mixture.sample_rate) +
                        " Hz, models at " + std::to_string(dict.sample_rate()) + " Hz");
  }
  for (std::size_t i = 0; i < dict.size(); ++i) {
    if (mixture.size() < dict.model(i).config().frontend_width) {
      throw ContractError("mixture shorter than the front-end width of '" + dict.name(i) + "'");
    }
  }
}

Tensor warm_latent(const EndToEndNae& model, const Waveform& input) {
  Tape tape;
  Tensor h = model.encode(tape, waveform_tensor(input));
  for (double& v : h.values()) v = softplus_inverse(std::max(v, kMinWarmActivation));
  return h;
}

// Per-source estimates [1 x L] for the current variables.
std::vector<Tensor> estimates(Tape& tape, const std::vector<EndToEndNae>& models,
                              const InferenceVariables& vars, std::size_t length) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (vars.mode == InferenceMode::decoder_only) {
      const Tensor h = softplus(tape, vars.per_source[i]);
      out.push_back(slice_last(tape, models[i].decode(tape, h), 0, length));
    } else {
      out.push_back(models[i].forward(tape, vars.per_source[i]));
    }
  }
  return out;
}

struct WindowResult {
  std::vector<std::vector<double>> estimates;
  std::vector<double> history;
};

WindowResult separate_window(const Waveform& mixture, const SourceDict& dict,
                             const std::vector<EndToEndNae>& frozen,
                             const InferenceConfig& config) {
  const std::size_t length = mixture.size();
  InferenceVariables vars = init_variables(mixture, dict, config);
  const Tensor target = waveform_tensor(mixture);
  AdamState adam;
  const AdamConfig adam_config{config.learning_rate};

  WindowResult result;
  double best = -INFINITY;
  for (std::size_t it = 0; it <= config.iterations; ++it) {
    Tape tape;
    const std::vector<Tensor> parts = estimates(tape, frozen, vars, length);
    Tensor total = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) total = add(tape, total, parts[i]);
    const Tensor objective = sdr_objective(tape, total, target);
    const double value = objective.item();
    result.history.push_back(value);
    if (value > best || result.estimates.empty()) {
      best = value;
      result.estimates.clear();
      for (const auto& p : parts) result.estimates.emplace_back(p.values().begin(), p.values().end());
    }
    if (it == config.iterations) break;
    tape.backward(scale(tape, objective, -1.0));
    adam_step(vars.per_source, adam, adam_config);
    for (const auto& v : vars.per_source) v.zero_grad();
  }
  return result;
}

}  // namespace

InferenceVariables init_variables(const Waveform& mixture, const SourceDict& dict,
                                  const InferenceConfig& config) {
  check_inputs(mixture, dict);
  const std::size_t k = dict.size();
  const std::size_t length = mixture.size();
  Waveform share = mixture;
  for (double& s : share.samples) s /= static_cast<double>(k);

  InferenceVariables vars;
  vars.mode = config.mode;
  std::mt19937_64 rng(config.seed);
  double rms = 0.0;
  for (double s : mixture.samples) rms += s * s;
  rms = std::sqrt(rms / static_cast<double>(std::max<std::size_t>(length, 1)));

  for (std::size_t i = 0; i < k; ++i) {
    const auto& model = dict.model(i);
    const auto& c = model.config();
    Tensor v;
    switch (config.effective_init()) {
      case InitStrategy::encoder_warm_start:
        v = config.mode == InferenceMode::decoder_only ? warm_latent(model, mixture)
                                                       : waveform_tensor(share);
        break;
      case InitStrategy::uniform_split:
        v = config.mode == InferenceMode::decoder_only ? warm_latent(model, share)
                                                       : waveform_tensor(share);
        break;
      case InitStrategy::random: {
        std::normal_distribution<double> gauss(0.0, 1.0);
        if (config.mode == InferenceMode::decoder_only) {
          v = Tensor({c.latent_dim, c.frames(length)});
          for (double& x : v.values()) x = 0.1 * gauss(rng);
        } else {
          v = Tensor({1, length});
          for (double& x : v.values()) x = 0.01 * rms * gauss(rng);
        }
        break;
      }
    }
    v.set_requires_grad(true);
    vars.per_source.push_back(v);
  }
  return vars;
}

SeparationResult separate(const Waveform& mixture, const SourceDict& dict,
                          const InferenceConfig& config) {
  config.validate();
  check_inputs(mixture, dict);

  SeparationResult result;
  for (std::size_t i = 0; i < dict.size(); ++i) {
    result.names.push_back(dict.name(i));
    result.estimates.push_back(Waveform{std::vector<double>(mixture.size(), 0.0), mixture.sample_rate});
  }
  if (!(energy(mixture) > 0)) {
    result.silent_mixture = true;
    return result;
  }

  std::vector<EndToEndNae> frozen;
  std::size_t min_window = 0;
  for (std::size_t i = 0; i < dict.size(); ++i) {
    frozen.push_back(dict.model(i).clone());
    frozen.back().set_trainable(false);
    min_window = std::max(min_window, dict.model(i).config().frontend_width);
  }

  // Window boundaries; a short tail is folded into the previous window.
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  const std::size_t n = mixture.size();
  const std::size_t w = config.window_samples == 0 ? n : std::max(config.window_samples, min_window);
  for (std::size_t start = 0; start < n; start += w) {
    const std::size_t end = std::min(n, start + w);
    if (!windows.empty() && end - start < min_window) {
      windows.back().second = end;
    } else {
      windows.emplace_back(start, end);
    }
  }

  for (const auto& [start, end] : windows) {
    Waveform piece{std::vector<double>(mixture.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                       mixture.samples.begin() + static_cast<std::ptrdiff_t>(end)),
                   mixture.sample_rate};
    if (!(energy(piece) > 0)) continue;
    const WindowResult part = separate_window(piece, dict, frozen, config);
    for (std::size_t i = 0; i < dict.size(); ++i) {
      std::copy(part.estimates[i].begin(), part.estimates[i].end(),
                result.estimates[i].samples.begin() + static_cast<std::ptrdiff_t>(start));
    }
    result.objective_history.insert(result.objective_history.end(), part.history.begin(),
                                    part.history.end());
  }
  return result;
}

std::string objective_history_csv(const std::vector<double>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,objective\n";
  for (std::size_t i = 0; i < history.size(); ++i) os << i << ',' << history[i] << '\n';
  return os.str();
}

}  // namespace nae
