#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nae {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

double energy(const Waveform& w);

// PCM 16-bit RIFF/WAVE. Stereo input is averaged to mono.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(std::string_view bytes);
// Writes PCM 16-bit mono. Samples outside [-1, 1] are clamped.
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::string encode_wav(const Waveform& w);
// Scales the waveform down when its peak exceeds 1.0, writes it, and returns the
// gain applied (1.0 when untouched).
double write_wav_normalized(const std::filesystem::path& path, const Waveform& w);

// Kaiser-windowed sinc polyphase resampler. Output length is
// round(len * target / source).
Waveform resample(const Waveform& w, int target_rate);

// Uniformly random window of `seconds` length.
Waveform snippet(const Waveform& w, double seconds, std::uint64_t seed);

struct MixSpec {
  std::size_t reference_index = 0;
  double snr_db = 0.0;
};

struct Mixture {
  Waveform mixture;
  std::vector<Waveform> sources;  // scaled sources; they sum to `mixture`
  std::vector<double> gains;
};

// Scales every non-reference source by a common gain so that
// 10 log10(E_ref / E_interference) == snr_db, where E_interference is the
// energy of the summed non-reference sources.
Mixture mix_at_snr(const std::vector<Waveform>& sources, const MixSpec& spec);

enum class SynthKind { tonal, filtered_noise, chirp };

SynthKind parse_synth_kind(std::string_view name);
std::string_view to_string(SynthKind kind);

// Synthetic source classes occupying disjoint frequency bands:
//   tonal           harmonic stacks, f0 110-220 Hz with drift, partials below 1.5 kHz
//   chirp           linear sweeps inside 1.8-3.0 kHz
//   filtered_noise  Gaussian noise band-passed inside 3.6-7.0 kHz
// Each kind has note-like segments separated by occasional silences. Returned as
// clips of at most 10 s whose lengths sum to `seconds`.
std::vector<Waveform> synth_corpus(SynthKind kind, double seconds, int sample_rate,
                                   std::uint64_t seed);

}  // namespace nae
