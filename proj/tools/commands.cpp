#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nae/audio.hpp"
#include "nae/errors.hpp"
#include "nae/metrics.hpp"
#include "nae/model.hpp"
#include "nae/selfcheck.hpp"
#include "nae/separator.hpp"
#include "nae/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace nae::cli {
namespace {

// Thrown for inconsistent arguments detected after parsing; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::optional<fs::path> config_file;
  std::optional<std::uint64_t> seed;

  // model
  std::optional<std::string> preset;
  std::optional<std::size_t> filters, width, stride, kernel, latent;
  std::optional<std::vector<std::size_t>> encoder;
  std::optional<int> model_rate;

  // training
  std::optional<double> train_lr, l1, snippet_seconds;
  std::optional<std::size_t> epochs, batch;

  // inference
  std::optional<std::string> mode, init;
  std::optional<std::size_t> iterations, window;
  std::optional<double> infer_lr;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

template <class T>
void take(const std::optional<T>& flag, T& dst) {
  if (flag) dst = *flag;
}

// defaults < config file < flags
struct Resolved {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  InferenceConfig inference;
};

Resolved resolve(const RunConfig& rc) {
  Resolved r;
  json file = rc.config_file ? read_json(*rc.config_file) : json::object();
  take(file, "seed", r.seed);
  take(rc.seed, r.seed);

  json jm = file.value("model", json::object());
  std::string preset = "tiny";
  take(jm, "preset", preset);
  take(rc.preset, preset);
  if (preset == "tiny") r.model = ModelConfig::tiny();
  else if (preset == "default") r.model = ModelConfig{};
  else throw UsageError("unknown model preset '" + preset + "' (tiny|default)");
  take(jm, "sample_rate", r.model.sample_rate);
  take(jm, "frontend_filters", r.model.frontend_filters);
  take(jm, "frontend_width", r.model.frontend_width);
  take(jm, "frontend_stride", r.model.frontend_stride);
  take(jm, "encoder_channels", r.model.encoder_channels);
  take(jm, "kernel_width", r.model.kernel_width);
  take(jm, "latent_dim", r.model.latent_dim);
  take(rc.model_rate, r.model.sample_rate);
  take(rc.filters, r.model.frontend_filters);
  take(rc.width, r.model.frontend_width);
  take(rc.stride, r.model.frontend_stride);
  take(rc.encoder, r.model.encoder_channels);
  take(rc.kernel, r.model.kernel_width);
  if (rc.encoder && !rc.latent && !jm.contains("latent_dim") && !rc.encoder->empty())
    r.model.latent_dim = rc.encoder->back();
  take(rc.latent, r.model.latent_dim);
  r.model.seed = r.seed;

  json jt = file.value("train", json::object());
  take(jt, "learning_rate", r.train.learning_rate);
  take(jt, "adam_beta1", r.train.adam_beta1);
  take(jt, "adam_beta2", r.train.adam_beta2);
  take(jt, "adam_eps", r.train.adam_eps);
  take(jt, "batch_size", r.train.batch_size);
  take(jt, "epochs", r.train.epochs);
  take(jt, "snippet_seconds", r.train.snippet_seconds);
  take(jt, "l1_activation_weight", r.train.l1_activation_weight);
  take(rc.train_lr, r.train.learning_rate);
  take(rc.batch, r.train.batch_size);
  take(rc.epochs, r.train.epochs);
  take(rc.snippet_seconds, r.train.snippet_seconds);
  take(rc.l1, r.train.l1_activation_weight);
  r.train.seed = r.seed;

  json ji = file.value("inference", json::object());
  std::optional<std::string> mode, init;
  if (ji.contains("mode")) mode = ji.at("mode").get<std::string>();
  if (ji.contains("init")) init = ji.at("init").get<std::string>();
  if (rc.mode) mode = rc.mode;
  if (rc.init) init = rc.init;
  try {
    if (mode) r.inference.mode = parse_inference_mode(*mode);
    if (init) r.inference.init = parse_init_strategy(*init);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  take(ji, "iterations", r.inference.iterations);
  take(ji, "learning_rate", r.inference.learning_rate);
  take(ji, "window_samples", r.inference.window_samples);
  take(rc.iterations, r.inference.iterations);
  take(rc.infer_lr, r.inference.learning_rate);
  take(rc.window, r.inference.window_samples);
  r.inference.seed = r.seed;
  return r;
}

// Corpus manifest: {"sources": [{"name": str, "files": [paths]}]}. Relative
// paths resolve against the manifest's directory.
std::vector<fs::path> manifest_files(const fs::path& manifest, const std::string& source) {
  json j = read_json(manifest);
  for (const auto& s : j.value("sources", json::array())) {
    if (s.value("name", "") != source) continue;
    std::vector<fs::path> files;
    for (const auto& f : s.value("files", json::array())) {
      fs::path p = f.get<std::string>();
      files.push_back(p.is_absolute() ? p : manifest.parent_path() / p);
    }
    if (files.empty()) throw UsageError("source '" + source + "' lists no files");
    return files;
  }
  throw UsageError("source '" + source + "' not found in " + manifest.string());
}

std::vector<Waveform> load_corpus(const std::vector<fs::path>& files, int rate) {
  std::vector<Waveform> corpus;
  for (const auto& f : files) {
    Waveform w = read_wav(f);
    corpus.push_back(w.sample_rate == rate ? std::move(w) : resample(w, rate));
  }
  return corpus;
}

double total_seconds(const std::vector<Waveform>& corpus) {
  double s = 0;
  for (const auto& w : corpus) s += w.seconds();
  return s;
}

std::vector<Waveform> usable(const std::vector<Waveform>& corpus, double seconds) {
  std::vector<Waveform> out;
  for (const auto& w : corpus)
    if (w.seconds() >= seconds) out.push_back(w);
  if (out.empty()) throw ContractError("no corpus file is at least one snippet long");
  return out;
}

// Denoising pairs: random target snippets mixed with random interferer snippets
// at `snr_db`, one pair per snippet length of target audio.
std::vector<TrainingPair> make_pairs(const std::vector<Waveform>& target,
                                     const std::vector<Waveform>& interferer, double seconds,
                                     double snr_db, std::uint64_t seed) {
  auto t = usable(target, seconds);
  auto n = usable(interferer, seconds);
  std::size_t count = std::max<std::size_t>(1, std::floor(total_seconds(target) / seconds));
  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  std::vector<TrainingPair> pairs;
  for (std::size_t attempt = 0; pairs.size() < count && attempt < 20 * count; ++attempt) {
    Waveform a = snippet(t[rng() % t.size()], seconds, rng());
    Waveform b = snippet(n[rng() % n.size()], seconds, rng());
    if (energy(a) <= 1e-9 || energy(b) <= 1e-9) continue;
    Mixture m = mix_at_snr({a, b}, {0, snr_db});
    pairs.push_back({m.mixture, m.sources[0]});
  }
  if (pairs.empty()) throw ContractError("could not draw non-silent training pairs");
  return pairs;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

void add_model_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--preset", rc.preset, "Model size: tiny|default")->group("Model");
  cmd->add_option("--filters", rc.filters, "Front-end filter count")->group("Model");
  cmd->add_option("--width", rc.width, "Front-end filter width")->group("Model");
  cmd->add_option("--stride", rc.stride, "Front-end stride")->group("Model");
  cmd->add_option("--encoder", rc.encoder, "Encoder channel widths")->group("Model");
  cmd->add_option("--kernel", rc.kernel, "Encoder/decoder kernel width")->group("Model");
  cmd->add_option("--latent", rc.latent, "Latent dimension")->group("Model");
  cmd->add_option("--model-rate", rc.model_rate, "Model sample rate")->group("Model");
}

void add_inference_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--mode", rc.mode, "decoder|full");
  cmd->add_option("--init", rc.init, "warm|random|split");
  cmd->add_option("--iterations", rc.iterations, "Inference iterations");
  cmd->add_option("--lr", rc.infer_lr, "Inference learning rate");
  cmd->add_option("--window", rc.window, "Window length in samples (0: whole mixture)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"End-to-end non-negative autoencoders for single-channel source separation",
               "nae"};
  app.require_subcommand(1);
  RunConfig rc;
  app.add_option("--config", rc.config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", rc.seed, "Random seed");

  // synth
  std::string kind;
  double seconds = 300;
  int rate = 16000;
  fs::path synth_out;
  std::optional<std::string> synth_name;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic WAV corpus and manifest");
  synth->add_option("--kind", kind, "tonal|filtered_noise|chirp")->required();
  synth->add_option("--seconds", seconds, "Total duration");
  synth->add_option("--rate", rate, "Sample rate");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--name", synth_name, "Source name in the manifest (default: kind)");

  // mix
  std::vector<fs::path> mix_sources;
  double snr = 0;
  std::size_t reference = 0;
  double mix_seconds = 2.0;
  fs::path mix_out;
  auto* mix = app.add_subcommand("mix", "Mix source WAVs at a given SNR");
  mix->add_option("sources", mix_sources, "Source WAVs")->required()->check(CLI::ExistingFile);
  mix->add_option("--snr", snr, "Reference-to-interference ratio in dB");
  mix->add_option("--reference", reference, "Index of the reference source");
  mix->add_option("--snippet", mix_seconds, "Snippet length in seconds (0: whole files)");
  mix->add_option("--out-dir", mix_out, "Output directory")->required();

  // train
  fs::path manifest, out_model;
  std::string source;
  bool discriminative = false;
  std::optional<std::string> target;
  double train_snr = 0;
  auto* train = app.add_subcommand("train", "Train a source model");
  train->add_option("--manifest", manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--source", source,
                    "Source to model; with --discriminative, the interfering source")
      ->required();
  train->add_option("--out-model", out_model, "Checkpoint path")->required();
  train->add_flag("--discriminative", discriminative, "Train a denoising baseline");
  train->add_option("--target", target, "Target source of the denoising baseline");
  train->add_option("--snr", train_snr, "Target-to-interferer ratio of training mixtures");
  train->add_option("--epochs", rc.epochs, "Epochs");
  train->add_option("--lr", rc.train_lr, "Learning rate");
  train->add_option("--batch", rc.batch, "Snippets per batch");
  train->add_option("--snippet", rc.snippet_seconds, "Snippet length in seconds");
  train->add_option("--l1", rc.l1, "Activation L1 weight");
  add_model_flags(train, rc);

  // separate
  fs::path mixture_path, out_dir;
  std::vector<fs::path> models;
  auto* sep = app.add_subcommand("separate", "Separate a mixture with pre-trained models");
  sep->add_option("--mixture", mixture_path, "Mixture WAV")->required()->check(CLI::ExistingFile);
  sep->add_option("--models,models", models, "Checkpoints, in output order")
      ->required()
      ->expected(1, -1)
      ->check(CLI::ExistingFile);
  sep->add_option("--out-dir", out_dir, "Output directory")->required();
  add_inference_flags(sep, rc);

  // eval
  fs::path est_dir, ref_dir, report_path;
  std::optional<fs::path> eval_mixture;
  std::string condition = "separated";
  auto* eval = app.add_subcommand("eval", "Score estimates against references");
  eval->add_option("--estimates", est_dir, "Estimate directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--references", ref_dir, "Reference directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", report_path, "Report JSON path")->required();
  eval->add_option("--condition", condition, "Condition label");
  eval->add_option("--mixture", eval_mixture, "Also score this mixture as a baseline estimate");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient self-check");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    Resolved cfg = resolve(rc);

    if (*synth) {
      SynthKind k;
      try {
        k = parse_synth_kind(kind);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      std::string name = synth_name.value_or(kind);
      fs::create_directories(synth_out);
      auto clips = synth_corpus(k, seconds, rate, cfg.seed);
      json files = json::array();
      for (std::size_t i = 0; i < clips.size(); ++i) {
        std::ostringstream fname;
        fname << name << "_" << std::setw(3) << std::setfill('0') << i << ".wav";
        write_wav_normalized(synth_out / fname.str(), clips[i]);
        files.push_back(fname.str());
      }
      fs::path mpath = synth_out / "manifest.json";
      json m = fs::exists(mpath) ? read_json(mpath) : json{{"sources", json::array()}};
      auto& list = m["sources"];
      list.erase(std::remove_if(list.begin(), list.end(),
                                [&](const json& s) { return s.value("name", "") == name; }),
                 list.end());
      list.push_back({{"name", name}, {"files", files}});
      write_text(mpath, m.dump(2) + "\n");
      out << "wrote " << clips.size() << " clips (" << seconds << " s) for '" << name << "' to "
          << synth_out.string() << "\n";
      return kSuccess;
    }

    if (*mix) {
      std::vector<Waveform> srcs;
      for (std::size_t i = 0; i < mix_sources.size(); ++i) {
        Waveform w = read_wav(mix_sources[i]);
        if (mix_seconds > 0) w = snippet(w, mix_seconds, cfg.seed + i);
        srcs.push_back(std::move(w));
      }
      std::size_t len = srcs.front().size();
      for (auto& w : srcs) {
        if (w.sample_rate != srcs.front().sample_rate) w = resample(w, srcs.front().sample_rate);
        len = std::min(len, w.size());
      }
      for (auto& w : srcs) w.samples.resize(len);
      Mixture m = mix_at_snr(srcs, {reference, snr});
      fs::create_directories(mix_out / "references");
      double peak = 0;
      for (double s : m.mixture.samples) peak = std::max(peak, std::abs(s));
      double gain = peak > 1.0 ? 1.0 / peak : 1.0;
      auto scaled = [gain](Waveform w) {
        for (double& s : w.samples) s *= gain;
        return w;
      };
      write_wav(mix_out / "mixture.wav", scaled(m.mixture));
      for (std::size_t i = 0; i < m.sources.size(); ++i)
        write_wav(mix_out / "references" / mix_sources[i].filename(), scaled(m.sources[i]));
      write_text(mix_out / "mix.json",
                 json{{"snr_db", snr}, {"reference", reference}, {"gains", m.gains},
                      {"export_gain", gain}}
                         .dump(2) + "\n");
      out << "wrote mixture of " << srcs.size() << " sources to " << mix_out.string() << "\n";
      return kSuccess;
    }

    if (*train) {
      cfg.train.validate();
      if (discriminative && !target) throw UsageError("--discriminative requires --target");
      if (!discriminative && target) throw UsageError("--target requires --discriminative");
      std::string name = discriminative ? *target : source;
      cfg.model.name = name;
      EndToEndNae model = EndToEndNae::build(cfg.model);
      TrainResult result;
      if (discriminative) {
        auto tgt = load_corpus(manifest_files(manifest, *target), cfg.model.sample_rate);
        auto itf = load_corpus(manifest_files(manifest, source), cfg.model.sample_rate);
        auto pairs = make_pairs(tgt, itf, cfg.train.snippet_seconds, train_snr, cfg.seed);
        result = train_discriminative(model, pairs, cfg.train);
      } else {
        auto corpus = load_corpus(manifest_files(manifest, source), cfg.model.sample_rate);
        result = train_generative(model, corpus, cfg.train);
      }
      if (out_model.has_parent_path()) fs::create_directories(out_model.parent_path());
      save(model, out_model);
      fs::path csv = out_model;
      csv.replace_extension(".loss.csv");
      write_text(csv, loss_history_csv(result.history));
      out << "trained '" << name << "' (" << model.param_count() << " parameters): objective "
          << fmt(result.initial_objective) << " -> "
          << fmt(result.history.empty() ? result.initial_objective : result.history.back())
          << "\n";
      return kSuccess;
    }

    if (*sep) {
      cfg.inference.validate();
      SourceDict dict;
      for (const auto& path : models) {
        EndToEndNae m = load(path);
        std::string name = m.config().name;
        dict.add(name, std::move(m));
      }
      Waveform mixture = read_wav(mixture_path);
      if (mixture.sample_rate != dict.sample_rate())
        mixture = resample(mixture, dict.sample_rate());
      SeparationResult res = separate(mixture, dict, cfg.inference);
      fs::create_directories(out_dir);
      json gains = json::object();
      for (std::size_t i = 0; i < res.names.size(); ++i)
        gains[res.names[i]] = write_wav_normalized(out_dir / (res.names[i] + ".wav"), res.estimates[i]);
      write_text(out_dir / "objective.csv", objective_history_csv(res.objective_history));
      write_text(out_dir / "gains.json", gains.dump(2) + "\n");
      if (res.silent_mixture) err << "warning: silent mixture, estimates are zero\n";
      out << "separated " << res.names.size() << " sources (" << to_string(cfg.inference.mode)
          << ", " << inference_param_count(mixture.size(), dict, cfg.inference.mode)
          << " variables): objective " << fmt(res.objective_history.front()) << " -> "
          << fmt(*std::max_element(res.objective_history.begin(), res.objective_history.end()))
          << "\n";
      return kSuccess;
    }

    if (*eval) {
      SeparationReport report;
      std::vector<fs::path> refs;
      for (const auto& e : fs::directory_iterator(ref_dir))
        if (e.is_regular_file() && e.path().extension() == ".wav") refs.push_back(e.path());
      std::sort(refs.begin(), refs.end());
      if (refs.empty()) throw ContractError("no reference WAVs in " + ref_dir.string());
      std::optional<Waveform> mixture;
      if (eval_mixture) mixture = read_wav(*eval_mixture);
      std::string example = est_dir.filename().string();
      if (example.empty()) example = est_dir.parent_path().filename().string();
      for (const auto& ref_path : refs) {
        fs::path est_path = est_dir / ref_path.filename();
        if (!fs::exists(est_path)) throw ContractError("missing estimate " + est_path.string());
        Waveform ref = read_wav(ref_path);
        Waveform est = read_wav(est_path);
        std::string src = ref_path.stem().string();
        report.add(condition, example, src, sisdr(est, ref));
        if (mixture) report.add("mixture", example, src, sisdr(*mixture, ref));
      }
      if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
      write_text(report_path, report.to_json());
      fs::path rows = report_path, summary = report_path;
      rows.replace_extension(".csv");
      summary.replace_extension(".summary.csv");
      write_text(rows, report.rows_csv());
      write_text(summary, report.summary_csv());
      for (const auto& c : report.conditions()) {
        BoxplotStats s = report.summary(c);
        out << c << ": median " << fmt(s.median) << " dB (q25 " << fmt(s.q25) << ", q75 "
            << fmt(s.q75) << ", n=" << s.count << ")\n";
      }
      return kSuccess;
    }

    if (*gradcheck) {
      bool ok = true;
      for (const auto& e : run_gradcheck_suite(cfg.seed == 0 ? 7 : cfg.seed)) {
        bool pass = e.max_rel_error < kGradCheckTolerance;
        ok = ok && pass;
        out << std::left << std::setw(24) << e.op << std::scientific << std::setprecision(3)
            << e.max_rel_error << (pass ? "  ok" : "  FAIL") << "\n"
            << std::defaultfloat;
      }
      return ok ? kSuccess : kRuntimeFailure;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace nae::cli
