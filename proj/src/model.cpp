#include "nae/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

#include "nae/errors.hpp"

namespace nae {

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.frontend_filters = 16;
  c.frontend_width = 32;
  c.frontend_stride = 16;
  c.encoder_channels = {16, 8};
  c.kernel_width = 5;
  c.latent_dim = 8;
  return c;
}

void ModelConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (frontend_filters == 0 || frontend_width == 0 || frontend_stride == 0 || kernel_width == 0) {
    throw ConfigError("layer sizes must be >= 1");
  }
  if (encoder_channels.empty()) throw ConfigError("encoder needs at least one layer");
  for (auto c : encoder_channels) {
    if (c == 0) throw ConfigError("encoder channel counts must be >= 1");
  }
  if (latent_dim != encoder_channels.back()) {
    throw ConfigError("latent_dim " + std::to_string(latent_dim) +
                      " differs from last encoder width " +
                      std::to_string(encoder_channels.back()));
  }
  if (kernel_width % 2 == 0) throw ConfigError("kernel_width must be odd");
  if (frontend_width < frontend_stride || (frontend_width - frontend_stride) % 2 != 0) {
    throw ConfigError("frontend_width - frontend_stride must be even and non-negative");
  }
}

std::vector<std::size_t> ModelConfig::decoder_channels() const {
  std::vector<std::size_t> out(encoder_channels.rbegin() + 1, encoder_channels.rend());
  out.push_back(frontend_filters);
  return out;
}

Tensor waveform_tensor(const Waveform& w, bool requires_grad) {
  return Tensor({1, w.size()}, w.samples, requires_grad);
}

Waveform tensor_waveform(const Tensor& t, int sample_rate) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(t.values().begin(), t.values().end());
  return w;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.values()) v = u(rng);
}

ConvLayer make_conv(std::size_t c_in, std::size_t c_out, std::size_t width, std::size_t stride,
                    std::size_t pad, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ConvLayer l{Tensor({c_out, c_in, width}, true), Tensor({c_out}, true), stride, pad};
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * width));
  fill_uniform(l.weight, bound, rng);
  fill_uniform(l.bias, bound, rng);
  return l;
}

// Kernels stored [C_in x C_out x w]; fan-in counts the inputs reaching one output
// sample.
ConvLayer make_tconv(std::size_t c_in, std::size_t c_out, std::size_t width, std::size_t stride,
                     std::size_t pad, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ConvLayer l{Tensor({c_in, c_out, width}, true), Tensor({c_out}, true), stride, pad};
  const double fan_in = static_cast<double>(c_in * width) / static_cast<double>(stride);
  const double bound = 1.0 / std::sqrt(std::max(fan_in, 1.0));
  fill_uniform(l.weight, bound, rng);
  fill_uniform(l.bias, bound, rng);
  return l;
}

NormLayer make_norm(std::size_t channels) {
  NormLayer n{Tensor({channels}, true), Tensor({channels}, true), BatchNormState(channels)};
  for (double& g : n.gamma.values()) g = 1.0;
  return n;
}

template <class State>
Tensor apply_norm(Tape& tape, const Tensor& x, State& layer, NormMode mode) {
  if constexpr (std::is_const_v<State>) {
    return batchnorm1d(tape, x, layer.gamma, layer.beta, layer.state);
  } else {
    return batchnorm1d(tape, x, layer.gamma, layer.beta, layer.state, mode);
  }
}

}  // namespace

EndToEndNae EndToEndNae::build(const ModelConfig& config) {
  config.validate();
  EndToEndNae m;
  m.config_ = config;
  std::uint64_t layer = 0;
  auto next_seed = [&] { return splitmix64(config.seed * 1000003ull + layer++); };

  m.front_ = make_conv(1, config.frontend_filters, config.frontend_width, config.frontend_stride,
                       config.frontend_pad(), next_seed());
  std::size_t channels = config.frontend_filters;
  for (auto c : config.encoder_channels) {
    m.encoder_.push_back(
        make_conv(channels, c, config.kernel_width, 1, config.kernel_pad(), next_seed()));
    m.encoder_norm_.push_back(make_norm(c));
    channels = c;
  }
  for (auto c : config.decoder_channels()) {
    m.decoder_.push_back(
        make_tconv(channels, c, config.kernel_width, 1, config.kernel_pad(), next_seed()));
    m.decoder_norm_.push_back(make_norm(c));
    channels = c;
  }
  m.back_ = make_tconv(channels, 1, config.frontend_width, config.frontend_stride,
                       config.frontend_pad(), next_seed());
  return m;
}

void EndToEndNae::check_input(const Tensor& wave) const {
  if (wave.rank() != 2 || wave.dim(0) != 1) {
    throw DimensionError("model input must be [1 x L], got " + shape_str(wave.shape()));
  }
  if (wave.dim(1) < config_.frontend_width) {
    throw ContractError("input of " + std::to_string(wave.dim(1)) +
                        " samples shorter than the front-end width " +
                        std::to_string(config_.frontend_width));
  }
}

template <class Self>
Tensor EndToEndNae::encode_impl(Self& self, Tape& tape, const Tensor& wave, NormMode mode) {
  self.check_input(wave);
  const auto& cfg = self.config_;
  const std::size_t padded = cfg.frames(wave.dim(1)) * cfg.frontend_stride;
  Tensor x = padded == wave.dim(1) ? wave : slice_last(tape, wave, 0, padded);
  x = softplus(tape, conv1d(tape, x, self.front_.weight, self.front_.bias, self.front_.stride,
                            self.front_.pad));
  for (std::size_t i = 0; i < self.encoder_.size(); ++i) {
    const auto& l = self.encoder_[i];
    x = conv1d(tape, x, l.weight, l.bias, l.stride, l.pad);
    x = softplus(tape, apply_norm(tape, x, self.encoder_norm_[i], mode));
  }
  return x;
}

template <class Self>
Tensor EndToEndNae::decode_impl(Self& self, Tape& tape, const Tensor& activations,
                                NormMode mode) {
  if (activations.rank() != 2 || activations.dim(0) != self.config_.latent_dim) {
    throw DimensionError("activations must be [" + std::to_string(self.config_.latent_dim) +
                         " x frames], got " + shape_str(activations.shape()));
  }
  Tensor x = activations;
  for (std::size_t i = 0; i < self.decoder_.size(); ++i) {
    const auto& l = self.decoder_[i];
    x = tconv1d(tape, x, l.weight, l.bias, l.stride, l.pad);
    x = softplus(tape, apply_norm(tape, x, self.decoder_norm_[i], mode));
  }
  return tconv1d(tape, x, self.back_.weight, self.back_.bias, self.back_.stride, self.back_.pad);
}

Tensor EndToEndNae::encode(Tape& tape, const Tensor& wave, NormMode mode) {
  return encode_impl(*this, tape, wave, mode);
}

Tensor EndToEndNae::encode(Tape& tape, const Tensor& wave) const {
  return encode_impl(*this, tape, wave, NormMode::frozen);
}

Tensor EndToEndNae::decode(Tape& tape, const Tensor& activations, NormMode mode) {
  return decode_impl(*this, tape, activations, mode);
}

Tensor EndToEndNae::decode(Tape& tape, const Tensor& activations) const {
  return decode_impl(*this, tape, activations, NormMode::frozen);
}

Tensor EndToEndNae::forward(Tape& tape, const Tensor& wave, NormMode mode) {
  const Tensor h = encode(tape, wave, mode);
  return slice_last(tape, decode(tape, h, mode), 0, wave.dim(1));
}

Tensor EndToEndNae::forward(Tape& tape, const Tensor& wave) const {
  const Tensor h = encode(tape, wave);
  return slice_last(tape, decode(tape, h), 0, wave.dim(1));
}

Activations EndToEndNae::encode(const Waveform& x) const {
  if (x.sample_rate != config_.sample_rate) {
    throw ContractError("waveform at " + std::to_string(x.sample_rate) + " Hz, model expects " +
                        std::to_string(config_.sample_rate) + " Hz");
  }
  Tape tape;
  return {encode(tape, waveform_tensor(x))};
}

Waveform EndToEndNae::decode(const Activations& h) const {
  Tape tape;
  return tensor_waveform(decode(tape, h.matrix), config_.sample_rate);
}

Waveform EndToEndNae::forward(const Waveform& x) const {
  if (x.sample_rate != config_.sample_rate) {
    throw ContractError("waveform at " + std::to_string(x.sample_rate) + " Hz, model expects " +
                        std::to_string(config_.sample_rate) + " Hz");
  }
  Tape tape;
  return tensor_waveform(forward(tape, waveform_tensor(x)), config_.sample_rate);
}

std::vector<std::pair<std::string, Tensor>> EndToEndNae::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("front.weight", front_.weight);
  out.emplace_back("front.bias", front_.bias);
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string p = "enc" + std::to_string(i);
    out.emplace_back(p + ".weight", encoder_[i].weight);
    out.emplace_back(p + ".bias", encoder_[i].bias);
    out.emplace_back(p + ".bn.gamma", encoder_norm_[i].gamma);
    out.emplace_back(p + ".bn.beta", encoder_norm_[i].beta);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string p = "dec" + std::to_string(i);
    out.emplace_back(p + ".weight", decoder_[i].weight);
    out.emplace_back(p + ".bias", decoder_[i].bias);
    out.emplace_back(p + ".bn.gamma", decoder_norm_[i].gamma);
    out.emplace_back(p + ".bn.beta", decoder_norm_[i].beta);
  }
  out.emplace_back("back.weight", back_.weight);
  out.emplace_back("back.bias", back_.bias);
  return out;
}

std::vector<Tensor> EndToEndNae::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t EndToEndNae::param_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

std::vector<std::pair<std::string, BatchNormState*>> EndToEndNae::norm_states() {
  std::vector<std::pair<std::string, BatchNormState*>> out;
  for (std::size_t i = 0; i < encoder_norm_.size(); ++i) {
    out.emplace_back("enc" + std::to_string(i) + ".bn", &encoder_norm_[i].state);
  }
  for (std::size_t i = 0; i < decoder_norm_.size(); ++i) {
    out.emplace_back("dec" + std::to_string(i) + ".bn", &decoder_norm_[i].state);
  }
  return out;
}

std::vector<std::pair<std::string, const BatchNormState*>> EndToEndNae::norm_states() const {
  std::vector<std::pair<std::string, const BatchNormState*>> out;
  for (auto& [name, s] : const_cast<EndToEndNae*>(this)->norm_states()) out.emplace_back(name, s);
  return out;
}

void EndToEndNae::set_trainable(bool trainable) {
  for (auto& t : parameters()) t.set_requires_grad(trainable);
}

void EndToEndNae::zero_grad() const {
  for (const auto& t : parameters()) t.zero_grad();
}

EndToEndNae EndToEndNae::clone() const {
  EndToEndNae m = *this;
  auto deep = [](ConvLayer& l) {
    l.weight = l.weight.clone();
    l.bias = l.bias.clone();
  };
  deep(m.front_);
  deep(m.back_);
  for (auto& l : m.encoder_) deep(l);
  for (auto& l : m.decoder_) deep(l);
  for (auto* norms : {&m.encoder_norm_, &m.decoder_norm_}) {
    for (auto& n : *norms) {
      n.gamma = n.gamma.clone();
      n.beta = n.beta.clone();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'N', 'A', 'E', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put(bits, 8);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(const char* what) { return get(8, what); }
  double f64(const char* what) {
    const std::uint64_t bits = get(8, what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
  }
  std::uint64_t get(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct Entry {
  std::string name;
  Shape shape;
  std::span<double> values;
};

std::vector<Entry> checkpoint_entries(EndToEndNae& model) {
  std::vector<Entry> out;
  for (auto& [name, t] : model.named_parameters()) {
    Tensor handle = t;
    out.push_back({name, t.shape(), handle.values()});
  }
  for (auto& [name, state] : model.norm_states()) {
    out.push_back({name + ".running_mean", {state->running_mean.size()}, state->running_mean});
    out.push_back({name + ".running_var", {state->running_var.size()}, state->running_var});
  }
  return out;
}

}  // namespace

std::string serialize(const EndToEndNae& model) {
  const ModelConfig& c = model.config();
  Writer w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.sample_rate));
  w.u32(static_cast<std::uint32_t>(c.frontend_filters));
  w.u32(static_cast<std::uint32_t>(c.frontend_width));
  w.u32(static_cast<std::uint32_t>(c.frontend_stride));
  w.u32(static_cast<std::uint32_t>(c.kernel_width));
  w.u32(static_cast<std::uint32_t>(c.latent_dim));
  w.u32(static_cast<std::uint32_t>(c.encoder_channels.size()));
  for (auto ch : c.encoder_channels) w.u32(static_cast<std::uint32_t>(ch));
  w.u64(c.seed);
  w.str(c.name);

  // Entries only read through the spans below.
  auto entries = checkpoint_entries(const_cast<EndToEndNae&>(model));
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u64(d);
    for (double v : e.values) w.f64(v);
  }
  return w.take();
}

EndToEndNae deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a NAE checkpoint (bad magic)", 0);
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig c;
  c.sample_rate = static_cast<int>(r.u32("config"));
  c.frontend_filters = r.u32("config");
  c.frontend_width = r.u32("config");
  c.frontend_stride = r.u32("config");
  c.kernel_width = r.u32("config");
  c.latent_dim = r.u32("config");
  const std::uint32_t layers = r.u32("config");
  if (layers > 64) throw FormatError("implausible encoder depth", r.offset() - 4);
  c.encoder_channels.clear();
  for (std::uint32_t i = 0; i < layers; ++i) c.encoder_channels.push_back(r.u32("config"));
  c.seed = r.u64("config");
  c.name = r.str("config");

  const std::size_t config_end = r.offset();
  EndToEndNae model;
  try {
    model = EndToEndNae::build(c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid config block: ") + e.what(), config_end);
  }

  auto entries = checkpoint_entries(model);
  const std::uint32_t count = r.u32("entry count");
  if (count != entries.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " entries, model needs " +
                      std::to_string(entries.size()),
                      r.offset() - 4);
  }
  for (auto& e : entries) {
    const std::size_t at = r.offset();
    const std::string name = r.str("entry name");
    if (name != e.name) throw FormatError("expected entry '" + e.name + "', found '" + name + "'", at);
    const std::uint32_t rank = r.u32("entry rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u64("entry shape"));
    if (shape != e.shape) {
      throw FormatError("entry '" + name + "' has shape " + shape_str(shape) + ", expected " +
                        shape_str(e.shape),
                        at);
    }
    for (double& v : e.values) v = r.f64("entry values");
  }
  if (!r.done()) throw FormatError("trailing bytes after last entry", r.offset());
  return model;
}

void save(const EndToEndNae& model, const std::filesystem::path& path) {
  const std::string bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

EndToEndNae load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace nae
