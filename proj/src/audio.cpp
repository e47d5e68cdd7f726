#include "nae/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>

#include "nae/errors.hpp"

namespace nae {

double energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("truncated WAV header", b.size());
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  if (at + 2 > b.size()) throw FormatError("truncated WAV header", b.size());
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

Waveform decode_wav(std::string_view bytes) {
  if (bytes.size() < 12) throw FormatError("truncated WAV header", bytes.size());
  if (bytes.substr(0, 4) != "RIFF") throw FormatError("missing RIFF tag", 0);
  if (bytes.substr(8, 4) != "WAVE") throw FormatError("missing WAVE tag", 8);

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > bytes.size()) throw FormatError("truncated fmt chunk", pos);
      std::uint16_t format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible && size >= 26) format = read_u16(bytes, body + 24);
      if (format != kFormatPcm) {
        throw UnsupportedFormatError("WAV encoding " + std::to_string(format) +
                                     " is not PCM; only 16-bit PCM is supported");
      }
      if (bits != 16) {
        throw UnsupportedFormatError("WAV bit depth " + std::to_string(bits) +
                                     " unsupported; only 16-bit PCM is supported");
      }
      if (channels != 1 && channels != 2) {
        throw UnsupportedFormatError("WAV with " + std::to_string(channels) +
                                     " channels unsupported");
      }
      if (rate == 0) throw FormatError("zero sample rate", body + 4);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", pos);
      if (body + size > bytes.size()) throw FormatError("truncated data chunk", bytes.size());
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t frames = size / frame_bytes;
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          acc += static_cast<std::int16_t>(read_u16(bytes, body + i * frame_bytes + 2 * c));
        }
        w.samples[i] = acc / (32768.0 * channels);
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(have_fmt ? "missing data chunk" : "missing fmt chunk", pos);
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_wav(ss.str());
}

std::string encode_wav(const Waveform& w) {
  if (w.sample_rate <= 0) throw ContractError("write_wav: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : w.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const std::string bytes = encode_wav(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

double write_wav_normalized(const std::filesystem::path& path, const Waveform& w) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak <= 1.0) {
    write_wav(path, w);
    return 1.0;
  }
  Waveform scaled = w;
  const double gain = 1.0 / peak;
  for (double& s : scaled.samples) s *= gain;
  write_wav(path, scaled);
  return gain;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

constexpr double kKaiserBeta = 9.0;
constexpr double kZeroCrossings = 24.0;
constexpr double kCutoffFraction = 0.95;

double kaiser(double t, double half_width) {
  const double r = t / half_width;
  if (std::abs(r) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Taps for output samples whose position falls `frac` input samples past an
// integer index, normalized to unit DC gain.
std::vector<double> phase_taps(double frac, double cutoff, int half) {
  std::vector<double> taps(2 * half + 1);
  const double window_half = half + 1.0;
  double total = 0.0;
  for (int j = -half; j <= half; ++j) {
    const double t = j - frac;
    const double v = cutoff * sinc(cutoff * t) * kaiser(t, window_half);
    taps[j + half] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0 || w.sample_rate <= 0) throw ContractError("resample: rates must be positive");
  if (target_rate == w.sample_rate) return w;

  const long g = std::gcd(static_cast<long>(w.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;
  const long down = w.sample_rate / g;
  const double cutoff = kCutoffFraction * std::min(1.0, static_cast<double>(up) / down);
  const int half = static_cast<int>(std::ceil(kZeroCrossings / cutoff));
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(w.size()) * target_rate / w.sample_rate));

  const bool tabulate = up <= 1024;
  std::vector<std::vector<double>> table;
  if (tabulate) {
    table.reserve(static_cast<std::size_t>(up));
    for (long p = 0; p < up; ++p) {
      table.push_back(phase_taps(static_cast<double>(p) / up, cutoff, half));
    }
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const auto in_len = static_cast<long>(w.size());
  for (std::size_t n = 0; n < out_len; ++n) {
    const long long num = static_cast<long long>(n) * down;
    const long base = static_cast<long>(num / up);
    const long phase = static_cast<long>(num % up);
    std::vector<double> local;
    const std::vector<double>& taps =
        tabulate ? table[static_cast<std::size_t>(phase)]
                 : (local = phase_taps(static_cast<double>(phase) / up, cutoff, half));
    double acc = 0.0;
    for (int j = -half; j <= half; ++j) {
      const long idx = base + j;
      if (idx >= 0 && idx < in_len) acc += taps[j + half] * w.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[n] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snippets and mixing

Waveform snippet(const Waveform& w, double seconds, std::uint64_t seed) {
  if (!(seconds > 0)) throw ContractError("snippet: duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(seconds * w.sample_rate));
  if (n > w.size()) {
    throw ContractError("snippet: waveform of " + std::to_string(w.size()) +
                        " samples shorter than requested " + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> offset(0, w.size() - n);
  const std::size_t start = offset(rng);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(start + n));
  return out;
}

Mixture mix_at_snr(const std::vector<Waveform>& sources, const MixSpec& spec) {
  if (sources.empty()) throw ContractError("mix_at_snr: no sources");
  if (spec.reference_index >= sources.size()) {
    throw ContractError("mix_at_snr: reference index out of range");
  }
  if (!std::isfinite(spec.snr_db)) throw ContractError("mix_at_snr: SNR must be finite");
  const std::size_t n = sources.front().size();
  const int rate = sources.front().sample_rate;
  for (const auto& s : sources) {
    if (s.size() != n || s.sample_rate != rate) {
      throw ContractError("mix_at_snr: sources differ in length or sample rate");
    }
  }
  const Waveform& ref = sources[spec.reference_index];
  const double ref_energy = energy(ref);
  if (!(ref_energy > 0)) throw ContractError("mix_at_snr: reference source is silent");

  Mixture out;
  out.gains.assign(sources.size(), 1.0);
  if (sources.size() > 1) {
    Waveform interference{std::vector<double>(n, 0.0), rate};
    for (std::size_t i = 0; i < sources.size(); ++i) {
      if (i == spec.reference_index) continue;
      for (std::size_t t = 0; t < n; ++t) interference.samples[t] += sources[i].samples[t];
    }
    const double int_energy = energy(interference);
    if (!(int_energy > 0)) throw ContractError("mix_at_snr: interference is silent");
    const double gain = std::sqrt(ref_energy / (int_energy * std::pow(10.0, spec.snr_db / 10.0)));
    for (std::size_t i = 0; i < sources.size(); ++i) {
      if (i != spec.reference_index) out.gains[i] = gain;
    }
  }

  out.mixture = Waveform{std::vector<double>(n, 0.0), rate};
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Waveform scaled = sources[i];
    for (double& s : scaled.samples) s *= out.gains[i];
    for (std::size_t t = 0; t < n; ++t) out.mixture.samples[t] += scaled.samples[t];
    out.sources.push_back(std::move(scaled));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "tonal") return SynthKind::tonal;
  if (name == "filtered_noise") return SynthKind::filtered_noise;
  if (name == "chirp") return SynthKind::chirp;
  throw ConfigError("unknown synthetic kind '" + std::string(name) + "'");
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::tonal: return "tonal";
    case SynthKind::filtered_noise: return "filtered_noise";
    case SynthKind::chirp: return "chirp";
  }
  return "unknown";
}

namespace {

constexpr double kClipSeconds = 10.0;
constexpr double kSilenceProbability = 0.15;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Raised-cosine fade in/out over `ramp` samples.
void apply_fades(std::span<double> seg, std::size_t ramp) {
  ramp = std::min(ramp, seg.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * (i + 0.5) / ramp);
    seg[i] *= g;
    seg[seg.size() - 1 - i] *= g;
  }
}

void render_tonal(std::span<double> seg, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f0 = 110.0 + 110.0 * u(rng);
  const double vibrato_rate = 1.0 + 3.0 * u(rng);
  const double vibrato_phase = kTwoPi * u(rng);
  const double glide = (u(rng) - 0.5) * 0.1;  // +-5 % across the note
  const int partials = std::max(1, static_cast<int>(1500.0 / (f0 * 1.1)));
  std::vector<double> amp(partials), phase(partials);
  double total = 0.0;
  for (int h = 0; h < partials; ++h) {
    amp[h] = (0.5 + 0.5 * u(rng)) / (h + 1);
    phase[h] = kTwoPi * u(rng);
    total += amp[h];
  }
  const double level = (0.1 + 0.2 * u(rng)) / total;
  const double dur = static_cast<double>(seg.size()) / rate;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + glide * t / dur + 0.02 * std::sin(kTwoPi * vibrato_rate * t + vibrato_phase));
    double s = 0.0;
    for (int h = 0; h < partials; ++h) {
      phase[h] += kTwoPi * f * (h + 1) / rate;
      s += amp[h] * std::sin(phase[h]);
    }
    seg[i] = level * s;
  }
  apply_fades(seg, static_cast<std::size_t>(0.01 * rate));
}

void render_chirp(std::span<double> seg, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f_start = 1800.0 + 1200.0 * u(rng);
  const double f_end = 1800.0 + 1200.0 * u(rng);
  const double level = 0.1 + 0.2 * u(rng);
  double phase = kTwoPi * u(rng);
  const double n = static_cast<double>(seg.size());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const double f = f_start + (f_end - f_start) * i / n;
    phase += kTwoPi * f / rate;
    const double window = 0.5 - 0.5 * std::cos(kTwoPi * (i + 0.5) / n);
    seg[i] = level * window * std::sin(phase);
  }
}

// RBJ constant-peak band-pass biquad.
struct Biquad {
  double b0, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  Biquad(double center, double q, int rate) {
    const double w0 = kTwoPi * center / rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
  }

  double operator()(double x) {
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

void render_noise(std::span<double> seg, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double nyquist_guard = 0.45 * rate;
  const double center = std::min(4300.0 + 2000.0 * u(rng), nyquist_guard);
  const double q = 3.0 + 3.0 * u(rng);
  Biquad first(center, q, rate), second(center, q, rate);
  const auto warmup = static_cast<std::size_t>(0.05 * rate);
  for (std::size_t i = 0; i < warmup; ++i) second(first(gauss(rng)));
  double e = 0.0;
  for (double& s : seg) {
    s = second(first(gauss(rng)));
    e += s * s;
  }
  const double rms = std::sqrt(e / std::max<std::size_t>(seg.size(), 1));
  const double target = 0.05 + 0.1 * u(rng);
  if (rms > 0) {
    for (double& s : seg) s *= target / rms;
  }
  apply_fades(seg, static_cast<std::size_t>(0.01 * rate));
}

}  // namespace

std::vector<Waveform> synth_corpus(SynthKind kind, double seconds, int sample_rate,
                                   std::uint64_t seed) {
  if (!(seconds > 0)) throw ContractError("synth_corpus: duration must be positive");
  if (sample_rate < 8000) throw ContractError("synth_corpus: sample rate below 8 kHz");
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(kind) + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const auto total = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const auto clip_len = static_cast<std::size_t>(kClipSeconds * sample_rate);
  std::vector<Waveform> clips;
  for (std::size_t done = 0; done < total;) {
    Waveform clip;
    clip.sample_rate = sample_rate;
    clip.samples.assign(std::min(clip_len, total - done), 0.0);
    std::size_t pos = 0;
    while (pos < clip.size()) {
      double dur = 0.0;
      switch (kind) {
        case SynthKind::tonal: dur = 0.15 + 0.35 * u(rng); break;
        case SynthKind::chirp: dur = 0.15 + 0.25 * u(rng); break;
        case SynthKind::filtered_noise: dur = 0.2 + 0.4 * u(rng); break;
      }
      const std::size_t len =
          std::min(clip.size() - pos, static_cast<std::size_t>(dur * sample_rate));
      std::span<double> seg(clip.samples.data() + pos, len);
      if (u(rng) >= kSilenceProbability && len > 1) {
        switch (kind) {
          case SynthKind::tonal: render_tonal(seg, sample_rate, rng); break;
          case SynthKind::chirp: render_chirp(seg, sample_rate, rng); break;
          case SynthKind::filtered_noise: render_noise(seg, sample_rate, rng); break;
        }
      }
      pos += std::max<std::size_t>(len, 1);
    }
    done += clip.size();
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace nae
