#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nae/audio.hpp"
#include "nae/errors.hpp"
#include "nae/metrics.hpp"
#include "nae/model.hpp"
#include "nae/selfcheck.hpp"
#include "nae/separator.hpp"
#include "nae/trainer.hpp"

namespace py = pybind11;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

nae::Waveform to_waveform(const Array& a, int rate) {
  if (a.ndim() != 1) throw nae::DimensionError("expected a 1-D sample array");
  return {std::vector<double>(a.data(), a.data() + a.size()), rate};
}

Array to_array(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

nae::SourceDict make_dict(const std::vector<nae::EndToEndNae>& models) {
  nae::SourceDict dict;
  for (const auto& m : models) dict.add(m.config().name, m);
  return dict;
}

}  // namespace

PYBIND11_MODULE(_nae, m) {
  m.doc() = "End-to-end non-negative autoencoders for single-channel source separation";

  py::register_exception<nae::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<nae::ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<nae::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<nae::FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<nae::VersionError>(m, "VersionError", PyExc_IOError);

  py::class_<nae::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("tiny", &nae::ModelConfig::tiny)
      .def_readwrite("sample_rate", &nae::ModelConfig::sample_rate)
      .def_readwrite("frontend_filters", &nae::ModelConfig::frontend_filters)
      .def_readwrite("frontend_width", &nae::ModelConfig::frontend_width)
      .def_readwrite("frontend_stride", &nae::ModelConfig::frontend_stride)
      .def_readwrite("encoder_channels", &nae::ModelConfig::encoder_channels)
      .def_readwrite("kernel_width", &nae::ModelConfig::kernel_width)
      .def_readwrite("latent_dim", &nae::ModelConfig::latent_dim)
      .def_readwrite("seed", &nae::ModelConfig::seed)
      .def_readwrite("name", &nae::ModelConfig::name)
      .def("validate", &nae::ModelConfig::validate)
      .def("frames", &nae::ModelConfig::frames);

  py::class_<nae::EndToEndNae>(m, "Model")
      .def(py::init(&nae::EndToEndNae::build), py::arg("config"))
      .def_property_readonly("config", &nae::EndToEndNae::config)
      .def("param_count", &nae::EndToEndNae::param_count)
      .def(
          "encode",
          [](const nae::EndToEndNae& self, const Array& x) {
            auto h = self.encode(to_waveform(x, self.config().sample_rate)).matrix;
            Array out({h.dim(0), h.dim(1)});
            std::copy(h.values().begin(), h.values().end(), out.mutable_data());
            return out;
          },
          py::arg("x"), "Activations [latent_dim x frames] with frozen statistics.")
      .def(
          "decode",
          [](const nae::EndToEndNae& self, const Array& h) {
            if (h.ndim() != 2) throw nae::DimensionError("activations must be 2-D");
            nae::Tensor t({static_cast<std::size_t>(h.shape(0)), static_cast<std::size_t>(h.shape(1))},
                          std::vector<double>(h.data(), h.data() + h.size()));
            return to_array(self.decode(nae::Activations{t}).samples);
          },
          py::arg("h"))
      .def(
          "forward",
          [](const nae::EndToEndNae& self, const Array& x) {
            return to_array(self.forward(to_waveform(x, self.config().sample_rate)).samples);
          },
          py::arg("x"))
      .def("clone", &nae::EndToEndNae::clone)
      .def("save", [](const nae::EndToEndNae& self, const std::filesystem::path& p) { nae::save(self, p); })
      .def_static("load", [](const std::filesystem::path& p) { return nae::load(p); })
      .def("serialize", [](const nae::EndToEndNae& self) { return py::bytes(nae::serialize(self)); })
      .def_static("deserialize", [](const py::bytes& b) { return nae::deserialize(std::string(b)); });

  py::class_<nae::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &nae::TrainConfig::learning_rate)
      .def_readwrite("adam_beta1", &nae::TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &nae::TrainConfig::adam_beta2)
      .def_readwrite("adam_eps", &nae::TrainConfig::adam_eps)
      .def_readwrite("batch_size", &nae::TrainConfig::batch_size)
      .def_readwrite("epochs", &nae::TrainConfig::epochs)
      .def_readwrite("snippet_seconds", &nae::TrainConfig::snippet_seconds)
      .def_readwrite("seed", &nae::TrainConfig::seed)
      .def_readwrite("l1_activation_weight", &nae::TrainConfig::l1_activation_weight);

  py::class_<nae::InferenceConfig>(m, "InferenceConfig")
      .def(py::init<>())
      .def_property(
          "mode", [](const nae::InferenceConfig& c) { return std::string(nae::to_string(c.mode)); },
          [](nae::InferenceConfig& c, const std::string& s) { c.mode = nae::parse_inference_mode(s); })
      .def_property(
          "init",
          [](const nae::InferenceConfig& c) -> py::object {
            if (!c.init) return py::none();
            switch (*c.init) {
              case nae::InitStrategy::encoder_warm_start: return py::str("encoder_warm_start");
              case nae::InitStrategy::random: return py::str("random");
              case nae::InitStrategy::uniform_split: return py::str("uniform_split");
            }
            return py::none();
          },
          [](nae::InferenceConfig& c, const py::object& s) {
            if (s.is_none()) c.init.reset();
            else c.init = nae::parse_init_strategy(s.cast<std::string>());
          })
      .def_readwrite("iterations", &nae::InferenceConfig::iterations)
      .def_readwrite("learning_rate", &nae::InferenceConfig::learning_rate)
      .def_readwrite("seed", &nae::InferenceConfig::seed)
      .def_readwrite("window_samples", &nae::InferenceConfig::window_samples);

  m.def(
      "train_generative",
      [](nae::EndToEndNae& model, const std::vector<Array>& corpus, const nae::TrainConfig& cfg) {
        std::vector<nae::Waveform> waves;
        for (const auto& a : corpus) waves.push_back(to_waveform(a, model.config().sample_rate));
        nae::TrainResult r;
        {
          py::gil_scoped_release release;
          r = nae::train_generative(model, waves, cfg);
        }
        return py::make_tuple(r.initial_objective, r.history);
      },
      py::arg("model"), py::arg("corpus"), py::arg("config"),
      "Trains in place. Returns (initial_objective, per-epoch history).");

  m.def(
      "train_discriminative",
      [](nae::EndToEndNae& model, const std::vector<std::pair<Array, Array>>& pairs,
         const nae::TrainConfig& cfg) {
        int rate = model.config().sample_rate;
        std::vector<nae::TrainingPair> ps;
        for (const auto& [x, y] : pairs) ps.push_back({to_waveform(x, rate), to_waveform(y, rate)});
        nae::TrainResult r;
        {
          py::gil_scoped_release release;
          r = nae::train_discriminative(model, ps, cfg);
        }
        return py::make_tuple(r.initial_objective, r.history);
      },
      py::arg("model"), py::arg("pairs"), py::arg("config"));

  m.def(
      "separate",
      [](const Array& mixture, const std::vector<nae::EndToEndNae>& models,
         const nae::InferenceConfig& cfg) {
        auto dict = make_dict(models);
        auto x = to_waveform(mixture, dict.sample_rate());
        nae::SeparationResult r;
        {
          py::gil_scoped_release release;
          r = nae::separate(x, dict, cfg);
        }
        py::dict out;
        py::list est;
        for (const auto& e : r.estimates) est.append(to_array(e.samples));
        out["names"] = r.names;
        out["estimates"] = est;
        out["objective_history"] = r.objective_history;
        out["silent_mixture"] = r.silent_mixture;
        return out;
      },
      py::arg("mixture"), py::arg("models"), py::arg("config") = nae::InferenceConfig{},
      "Estimates are returned in model order; each model's config.name labels its output.");

  m.def(
      "inference_param_count",
      [](std::size_t length, const std::vector<nae::EndToEndNae>& models, const std::string& mode) {
        return nae::inference_param_count(length, make_dict(models), nae::parse_inference_mode(mode));
      },
      py::arg("length"), py::arg("models"), py::arg("mode") = "decoder");

  m.def(
      "sisdr", [](const Array& e, const Array& r) {
        return nae::sisdr(std::span<const double>(e.data(), e.size()),
                          std::span<const double>(r.data(), r.size()));
      },
      py::arg("estimate"), py::arg("reference"));
  m.def(
      "sdr_ratio", [](const Array& x, const Array& y) {
        return nae::sdr_ratio(std::span<const double>(x.data(), x.size()),
                              std::span<const double>(y.data(), y.size()));
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "boxplot_stats",
      [](const std::vector<double>& v) {
        auto s = nae::boxplot_stats(v);
        py::dict d;
        d["median"] = s.median;
        d["q25"] = s.q25;
        d["q75"] = s.q75;
        d["min"] = s.min;
        d["max"] = s.max;
        d["count"] = s.count;
        return d;
      },
      py::arg("values"));

  m.def(
      "synth_corpus",
      [](const std::string& kind, double seconds, int rate, std::uint64_t seed) {
        std::vector<Array> out;
        for (const auto& w : nae::synth_corpus(nae::parse_synth_kind(kind), seconds, rate, seed))
          out.push_back(to_array(w.samples));
        return out;
      },
      py::arg("kind"), py::arg("seconds"), py::arg("sample_rate") = 16000, py::arg("seed") = 0);
  m.def(
      "mix_at_snr",
      [](const std::vector<Array>& sources, double snr_db, std::size_t reference) {
        std::vector<nae::Waveform> ws;
        for (const auto& a : sources) ws.push_back(to_waveform(a, 16000));
        auto mx = nae::mix_at_snr(ws, {reference, snr_db});
        std::vector<Array> scaled;
        for (const auto& s : mx.sources) scaled.push_back(to_array(s.samples));
        return py::make_tuple(to_array(mx.mixture.samples), scaled, mx.gains);
      },
      py::arg("sources"), py::arg("snr_db"), py::arg("reference") = 0,
      "Returns (mixture, scaled_sources, gains).");
  m.def(
      "snippet",
      [](const Array& x, double seconds, int rate, std::uint64_t seed) {
        return to_array(nae::snippet(to_waveform(x, rate), seconds, seed).samples);
      },
      py::arg("x"), py::arg("seconds"), py::arg("sample_rate"), py::arg("seed"));
  m.def(
      "resample",
      [](const Array& x, int rate, int target) {
        return to_array(nae::resample(to_waveform(x, rate), target).samples);
      },
      py::arg("x"), py::arg("sample_rate"), py::arg("target_rate"));
  m.def(
      "read_wav",
      [](const std::filesystem::path& p) {
        auto w = nae::read_wav(p);
        return py::make_tuple(to_array(w.samples), w.sample_rate);
      },
      py::arg("path"), "Returns (samples, sample_rate).");
  m.def(
      "write_wav",
      [](const std::filesystem::path& p, const Array& x, int rate) { nae::write_wav(p, to_waveform(x, rate)); },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  m.def("gradcheck", [](std::uint64_t seed) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : nae::run_gradcheck_suite(seed)) out.emplace_back(e.op, e.max_rel_error);
    return out;
  }, py::arg("seed") = 7);
  m.attr("GRADCHECK_TOLERANCE") = nae::kGradCheckTolerance;
}
