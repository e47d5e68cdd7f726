#include "nae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nae/errors.hpp"
#include "nae/ops.hpp"

namespace nae {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(snippet_seconds > 0)) throw ConfigError("snippet_seconds must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (l1_activation_weight < 0) throw ConfigError("l1_activation_weight must be >= 0");
}

SnippetSampler::SnippetSampler(const std::vector<std::size_t>& item_lengths, std::size_t window,
                               std::uint64_t seed)
    : window_(window), rng_(seed) {
  if (window == 0) throw ContractError("snippet window must be >= 1 sample");
  std::size_t total = 0;
  for (std::size_t i = 0; i < item_lengths.size(); ++i) {
    if (item_lengths[i] < window) continue;
    total += item_lengths[i] - window + 1;
    cumulative_.push_back(total);
    items_.push_back(i);
    lengths_.push_back(item_lengths[i]);
  }
  if (total == 0) {
    throw ContractError("no corpus item is at least " + std::to_string(window) + " samples long");
  }
}

SnippetSampler::Draw SnippetSampler::next() {
  std::uniform_int_distribution<std::size_t> pick(0, cumulative_.back() - 1);
  const std::size_t k = pick(rng_);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), k);
  const auto slot = static_cast<std::size_t>(it - cumulative_.begin());
  const std::size_t before = slot == 0 ? 0 : cumulative_[slot - 1];
  return {items_[slot], k - before};
}

namespace {

struct Example {
  const Waveform* input;
  const Waveform* target;
};

Tensor window_tensor(const Waveform& w, std::size_t offset, std::size_t length) {
  return Tensor({1, length},
                std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                                    w.samples.begin() + static_cast<std::ptrdiff_t>(offset + length)));
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

TrainResult train_examples(EndToEndNae& model, const std::vector<Example>& examples,
                           const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw ContractError("training corpus is empty");
  const int rate = model.config().sample_rate;
  double total_seconds = 0.0;
  std::vector<std::size_t> lengths;
  for (const auto& ex : examples) {
    if (ex.input->sample_rate != rate || ex.target->sample_rate != rate) {
      throw ContractError("corpus sample rate differs from the model's " + std::to_string(rate) +
                          " Hz");
    }
    if (ex.input->size() != ex.target->size()) {
      throw ContractError("training pair lengths differ: " + std::to_string(ex.input->size()) +
                          " vs " + std::to_string(ex.target->size()));
    }
    lengths.push_back(ex.input->size());
    total_seconds += ex.input->seconds();
  }
  if (total_seconds < config.snippet_seconds) {
    throw ContractError("corpus shorter than one snippet");
  }
  const auto window = static_cast<std::size_t>(std::llround(config.snippet_seconds * rate));
  if (window < model.config().frontend_width) {
    throw ContractError("snippet shorter than the front-end width");
  }
  SnippetSampler sampler(lengths, window, config.seed);
  const auto per_epoch =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(total_seconds / config.snippet_seconds)));

  model.set_trainable(true);
  const std::vector<Tensor> params = model.parameters();
  model.zero_grad();
  AdamState adam;
  const AdamConfig adam_config = config.adam();

  TrainResult result;
  bool first_batch = true;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < per_epoch; start += config.batch_size, ++batch) {
      const std::size_t count = std::min(config.batch_size, per_epoch - start);
      double batch_sum = 0.0;
      for (std::size_t b = 0; b < count; ++b) {
        const auto draw = sampler.next();
        const Example& ex = examples[draw.item];
        Tape tape;
        const Tensor x = window_tensor(*ex.input, draw.offset, window);
        const Tensor y = ex.input == ex.target ? x : window_tensor(*ex.target, draw.offset, window);
        const Tensor h = model.encode(tape, x, NormMode::train);
        const Tensor out = slice_last(tape, model.decode(tape, h, NormMode::train), 0, window);
        const Tensor objective = sdr_objective(tape, out, y);
        const double value = objective.item();
        if (!std::isfinite(value)) {
          throw NumericError("non-finite objective at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch) + " (corpus item " + std::to_string(draw.item) +
                             ", offset " + std::to_string(draw.offset) + ")");
        }
        Tensor loss = scale(tape, objective, -1.0 / static_cast<double>(count));
        if (config.l1_activation_weight > 0) {
          const double w = config.l1_activation_weight /
                           (static_cast<double>(count) * static_cast<double>(h.size()));
          loss = add(tape, loss, scale(tape, sum(tape, h), w));
        }
        tape.backward(loss);
        batch_sum += value;
      }
      for (const auto& p : params) {
        if (!all_finite(p.grad())) {
          throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch));
        }
      }
      if (first_batch) {
        result.initial_objective = batch_sum / static_cast<double>(count);
        first_batch = false;
      }
      adam_step(params, adam, adam_config);
      model.zero_grad();
      epoch_sum += batch_sum;
    }
    result.history.push_back(epoch_sum / static_cast<double>(per_epoch));
  }
  return result;
}

}  // namespace

TrainResult train_generative(EndToEndNae& model, const std::vector<Waveform>& corpus,
                             const TrainConfig& config) {
  std::vector<Example> examples;
  for (const auto& w : corpus) examples.push_back({&w, &w});
  return train_examples(model, examples, config);
}

TrainResult train_discriminative(EndToEndNae& model, const std::vector<TrainingPair>& pairs,
                                 const TrainConfig& config) {
  std::vector<Example> examples;
  for (const auto& p : pairs) examples.push_back({&p.input, &p.target});
  return train_examples(model, examples, config);
}

std::string loss_history_csv(const std::vector<double>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,mean_objective\n";
  for (std::size_t i = 0; i < history.size(); ++i) os << i + 1 << ',' << history[i] << '\n';
  return os.str();
}

}  // namespace nae
