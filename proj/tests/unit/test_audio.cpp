#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "nae/audio.hpp"
#include "nae/errors.hpp"

using namespace nae;

namespace {

void put16(std::string& s, std::uint16_t v) { s += char(v & 0xff); s += char(v >> 8); }
void put32(std::string& s, std::uint32_t v) { for (int i = 0; i < 4; ++i) s += char((v >> (8 * i)) & 0xff); }

std::string riff(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                 const std::string& data) {
  std::string fmt;
  put16(fmt, format);
  put16(fmt, channels);
  put32(fmt, rate);
  put32(fmt, rate * channels * bits / 8);
  put16(fmt, channels * bits / 8);
  put16(fmt, bits);
  std::string s = "RIFF";
  put32(s, 4 + 8 + fmt.size() + 8 + data.size());
  s += "WAVEfmt ";
  put32(s, fmt.size());
  s += fmt;
  s += "data";
  put32(s, data.size());
  return s + data;
}

double energy_of(const std::vector<double>& v) {
  double e = 0;
  for (double x : v) e += x * x;
  return e;
}

}  // namespace

TEST(Wav, ThreeSampleFixture) {
  // samples 0x4000, 0xC000, 0x7FFF = 16384, -16384, 32767
  std::string data = {'\x00', '\x40', '\x00', '\xC0', '\xFF', '\x7F'};
  Waveform w = decode_wav(riff(1, 1, 16000, 16, data));
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w.sample_rate, 16000);
  EXPECT_EQ(w.samples[0], 0.5);
  EXPECT_EQ(w.samples[1], -0.5);
  EXPECT_EQ(w.samples[2], 32767.0 / 32768.0);
}

TEST(Wav, StereoIsAveraged) {
  std::string data;
  put16(data, 16384);
  put16(data, 0);
  put16(data, static_cast<std::uint16_t>(-8192));
  put16(data, static_cast<std::uint16_t>(-8192));
  Waveform w = decode_wav(riff(1, 2, 8000, 16, data));
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w.samples[0], 0.25);
  EXPECT_EQ(w.samples[1], -0.25);
}

TEST(Wav, FullScaleAndSilence) {
  Waveform w{{1.0, 0.0, -1.0}, 16000};
  Waveform r = decode_wav(encode_wav(w));
  EXPECT_EQ(r.samples[0], 32767.0 / 32768.0);
  EXPECT_EQ(r.samples[1], 0.0);
  EXPECT_EQ(r.samples[2], -1.0);
  Waveform z{std::vector<double>(100, 0.0), 22050};
  Waveform zr = decode_wav(encode_wav(z));
  EXPECT_EQ(zr.samples, z.samples);
  EXPECT_EQ(zr.sample_rate, 22050);
}

TEST(Wav, RoundTripWithinOneLsb) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Waveform w;
  for (int i = 0; i < 5000; ++i) w.samples.push_back(u(rng));
  auto path = std::filesystem::temp_directory_path() / "nae_roundtrip_test.wav";
  write_wav(path, w);
  Waveform r = read_wav(path);
  std::filesystem::remove(path);
  ASSERT_EQ(r.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(r.samples[i] - w.samples[i]), 1.0 / 32768);
}

TEST(Wav, NormalizedWriteReportsGain) {
  auto path = std::filesystem::temp_directory_path() / "nae_norm_test.wav";
  EXPECT_DOUBLE_EQ(write_wav_normalized(path, Waveform{{0.5, 2.0, -1.0}, 16000}), 0.5);
  EXPECT_EQ(read_wav(path).samples[1], 32767.0 / 32768.0);
  EXPECT_EQ(write_wav_normalized(path, Waveform{{0.5}, 16000}), 1.0);
  std::filesystem::remove(path);
}

TEST(Wav, Errors) {
  EXPECT_THROW(decode_wav(riff(3, 1, 16000, 32, std::string(8, '\0'))), UnsupportedFormatError);
  EXPECT_THROW(decode_wav(riff(1, 1, 16000, 8, std::string(8, '\0'))), UnsupportedFormatError);
  std::string good = riff(1, 1, 16000, 16, std::string(6, '\0'));
  EXPECT_THROW(decode_wav(good.substr(0, 20)), FormatError);
  EXPECT_THROW(decode_wav("RIFX"), FormatError);
}

TEST(Resample, IdentityAtSameRate) {
  Waveform w{{0.1, -0.2, 0.3}, 16000};
  EXPECT_EQ(resample(w, 16000).samples, w.samples);
}

TEST(Resample, OutputLength) {
  Waveform w{std::vector<double>(44100, 0.0), 44100};
  EXPECT_EQ(resample(w, 16000).size(), 16000u);
  Waveform v{std::vector<double>(1001, 0.0), 48000};
  EXPECT_EQ(resample(v, 16000).size(), 334u);  // round(1001 / 3)
}

TEST(Resample, DcPreservedInInterior) {
  Waveform w{std::vector<double>(4800, 0.7), 48000};
  Waveform r = resample(w, 16000);
  for (std::size_t i = 100; i + 100 < r.size(); ++i) EXPECT_NEAR(r.samples[i], 0.7, 1e-6);
}

TEST(Resample, ToneSpectrumIsClean) {
  const int src = 48000, dst = 16000;
  Waveform w;
  w.sample_rate = src;
  for (int i = 0; i < src; ++i) w.samples.push_back(0.5 * std::sin(2 * std::numbers::pi * 1000.0 * i / src));
  Waveform r = resample(w, dst);
  // Blackman-Harris windowed DFT over an interior block, 1 Hz bins.
  const std::size_t N = 8000, off = 4000;
  const double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
  std::vector<double> x(N);
  for (std::size_t n = 0; n < N; ++n) {
    double t = 2 * std::numbers::pi * n / (N - 1);
    x[n] = r.samples[off + n] * (a0 - a1 * std::cos(t) + a2 * std::cos(2 * t) - a3 * std::cos(3 * t));
  }
  auto power = [&](double hz) {
    double re = 0, im = 0;
    for (std::size_t n = 0; n < N; ++n) {
      double ph = 2 * std::numbers::pi * hz * n / dst;
      re += x[n] * std::cos(ph);
      im -= x[n] * std::sin(ph);
    }
    return re * re + im * im;
  };
  double peak = power(1000.0);
  double worst = 0;
  for (double hz = 20; hz < dst / 2; hz += 10) {
    if (std::abs(hz - 1000.0) < 15) continue;  // main lobe of the window
    worst = std::max(worst, power(hz));
  }
  EXPECT_LT(10 * std::log10(worst / peak), -60.0);
  for (double hz = 20; hz < dst / 2; hz += 10) EXPECT_LE(power(hz), peak * (1 + 1e-9));
}

TEST(Snippet, StaysInBoundsAndIsSeeded) {
  Waveform w;
  for (int i = 0; i < 1000; ++i) w.samples.push_back(i);
  for (std::uint64_t s = 0; s < 200; ++s) {
    Waveform c = snippet(w, 0.01, s);  // 160 samples
    ASSERT_EQ(c.size(), 160u);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_EQ(c.samples[i], c.samples[i - 1] + 1);
  }
  EXPECT_EQ(snippet(w, 0.01, 5).samples, snippet(w, 0.01, 5).samples);
  EXPECT_THROW(snippet(w, 1.0, 0), ContractError);
}

TEST(MixAtSnr, EqualEnergyZeroDb) {
  Waveform a{{1, 0, 1, 0}, 16000}, b{{0, 1, 0, 1}, 16000};
  Mixture m = mix_at_snr({a, b}, {0, 0.0});
  EXPECT_DOUBLE_EQ(m.gains[1], 1.0);
  EXPECT_EQ(m.mixture.samples, (std::vector<double>{1, 1, 1, 1}));
}

TEST(MixAtSnr, ExactSnr) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (double snr : {-3.0, -1.2, 0.0, 2.5, 3.0}) {
    Waveform a, b, c;
    for (int i = 0; i < 1000; ++i) {
      a.samples.push_back(g(rng));
      b.samples.push_back(g(rng));
      c.samples.push_back(g(rng));
    }
    Mixture m = mix_at_snr({a, b, c}, {0, snr});
    std::vector<double> interf(1000);
    for (int i = 0; i < 1000; ++i) interf[i] = m.sources[1].samples[i] + m.sources[2].samples[i];
    double measured = 10 * std::log10(energy_of(m.sources[0].samples) / energy_of(interf));
    EXPECT_NEAR(measured, snr, 1e-9);
  }
}

TEST(MixAtSnr, MinusThreeDbScale) {
  Waveform a{{1, 0}, 16000}, b{{0, 1}, 16000};
  Mixture m = mix_at_snr({a, b}, {0, -3.0});
  EXPECT_NEAR(m.gains[1], std::pow(10.0, 3.0 / 20.0), 1e-12);
}

TEST(MixAtSnr, Errors) {
  Waveform a{{1, 0}, 16000}, z{{0, 0}, 16000}, s{{1}, 16000};
  EXPECT_THROW(mix_at_snr({a, z}, {0, 0.0}), ContractError);
  EXPECT_THROW(mix_at_snr({z, a}, {0, 0.0}), ContractError);
  EXPECT_THROW(mix_at_snr({a, s}, {0, 0.0}), ContractError);
  EXPECT_THROW(mix_at_snr({a, a}, {2, 0.0}), ContractError);
}

TEST(SynthCorpus, DurationDeterminismAndBands) {
  for (SynthKind k : {SynthKind::tonal, SynthKind::chirp, SynthKind::filtered_noise}) {
    auto a = synth_corpus(k, 25.0, 16000, 4), b = synth_corpus(k, 25.0, 16000, 4);
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_LE(a[i].seconds(), 10.0);
      EXPECT_EQ(a[i].samples, b[i].samples);
      total += a[i].size();
      for (double v : a[i].samples) ASSERT_LE(std::abs(v), 1.0);
    }
    EXPECT_EQ(total, 25u * 16000u);
  }
  EXPECT_EQ(parse_synth_kind("chirp"), SynthKind::chirp);
  EXPECT_THROW(parse_synth_kind("speech"), ConfigError);
}
