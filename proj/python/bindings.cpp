#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mtiqa/checkpoint.hpp"
#include "mtiqa/cli.hpp"
#include "mtiqa/config.hpp"
#include "mtiqa/correspondence.hpp"
#include "mtiqa/errors.hpp"
#include "mtiqa/losses.hpp"
#include "mtiqa/metrics.hpp"
#include "mtiqa/training.hpp"

namespace py = pybind11;
using namespace mtiqa;

namespace {

py::dict record_dict(const ImageRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["dataset"] = r.dataset_id;
  d["reference"] = r.reference_id;
  d["scene_mask"] = r.scene_mask;
  d["distortion"] = r.distortion;
  d["severity"] = r.severity;
  d["mos"] = r.mos;
  return d;
}

py::array_t<float> features_array(const FeatureImage& f) {
  py::array_t<float> out({f.height, f.width, f.channels});
  std::copy(f.data.begin(), f.data.end(), out.mutable_data());
  return out;
}

// Loaded checkpoint plus the config it was trained with.
class Predictor {
 public:
  explicit Predictor(const std::filesystem::path& path) : model_(model_from_checkpoint(load_checkpoint(path), &config_)) {}

  py::list predict_file(const std::filesystem::path& path, std::size_t crops) const {
    const DatasetFile file = read_dataset(path);
    std::vector<const FeatureImage*> images;
    std::vector<std::uint64_t> seeds;
    for (const auto& r : file.records) {
      images.push_back(&r.features);
      seeds.push_back(record_seed(config_.eval.crop_seed, r));
    }
    std::vector<Prediction> preds;
    {
      py::gil_scoped_release release;
      preds = predict(*model_, images, seeds, crops == 0 ? config_.eval.crops : crops);
    }
    py::list out;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      py::dict d;
      d["id"] = file.records[i].id;
      d["dataset"] = file.records[i].dataset_id;
      d["score"] = preds[i].score;
      if (preds[i].has_marginals) {
        d["quality"] = preds[i].quality;
        d["scene"] = preds[i].scene;
        d["distortion"] = preds[i].distortion;
      }
      out.append(d);
    }
    return out;
  }

  std::string config_text() const { return serialize_config(config_); }

 private:
  Config config_;
  std::unique_ptr<Model> model_;
};

}  // namespace

PYBIND11_MODULE(_mtiqa, m) {
  m.doc() = "Multitask blind image quality assessment on synthetic data.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<LabelSpace>(m, "LabelSpace")
      .def(py::init<int>(), py::arg("quality_levels") = 5)
      .def_property_readonly("quality_words", &LabelSpace::quality_words)
      .def_property_readonly("scenes", &LabelSpace::scenes)
      .def_property_readonly("distortions", &LabelSpace::distortions)
      .def("__len__", &LabelSpace::size)
      .def("flat_index", [](const LabelSpace& l, std::size_t c, std::size_t s, std::size_t d) {
        return l.flat_index({c, s, d});
      })
      .def("unflatten", [](const LabelSpace& l, std::size_t v) {
        const Triple t = l.unflatten(v);
        return py::make_tuple(t.c, t.s, t.d);
      })
      .def("render", [](const LabelSpace& l, std::size_t c, std::size_t s, std::size_t d) { return l.render({c, s, d}); })
      .def("descriptions", [](const LabelSpace& l) {
        std::vector<std::string> out;
        for (const auto& d : l.enumerate_descriptions()) out.push_back(d.text);
        return out;
      })
      .def("hash", &LabelSpace::hash);

  m.def(
      "joint_distribution",
      [](const std::vector<double>& logits, double tau, int quality_levels) {
        const auto jd = joint_distribution(LabelSpace(quality_levels), logits, tau);
        py::dict d;
        d["joint"] = jd.joint();
        d["quality"] = jd.quality();
        d["scene"] = jd.scene();
        d["distortion"] = jd.distortion();
        d["score"] = quality_score(jd.quality());
        return d;
      },
      py::arg("logits"), py::arg("tau") = 0.01, py::arg("quality_levels") = 5);
  m.def("quality_score", &quality_score);

  m.def("fidelity", &fidelity, py::arg("p"), py::arg("phat"));
  m.def("thurstone", &thurstone, py::arg("qx"), py::arg("qy"));
  m.def("distortion_loss", &distortion_loss, py::arg("target"), py::arg("marginal"));

  m.def("srcc", &srcc);
  m.def("plcc", &plcc, py::arg("x"), py::arg("y"), py::arg("mapped") = false);
  m.def(
      "gmad",
      [](const std::vector<double>& a, const std::vector<double>& b, std::size_t levels, double epsilon) {
        std::vector<std::string> warnings;
        py::list pairs;
        for (const auto& p : gmad(a, b, {levels, epsilon}, &warnings)) {
          py::dict d;
          d["attacker"] = p.attacker;
          d["defender"] = p.defender;
          d["level"] = p.level;
          d["best"] = p.best;
          d["worst"] = p.worst;
          d["attacker_gap"] = p.attacker_gap;
          d["defender_gap"] = p.defender_gap;
          d["epsilon"] = p.epsilon;
          pairs.append(d);
        }
        return py::make_tuple(pairs, warnings);
      },
      py::arg("scores_a"), py::arg("scores_b"), py::arg("levels") = 2, py::arg("epsilon") = 0.0);

  m.def("default_config", [] { return serialize_config(Config{}); });
  m.def(
      "load_config",
      [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
        Config c = load_config(path);
        for (const auto& o : overrides) apply_override(c, o);
        validate(c);
        return serialize_config(c);
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "read_dataset",
      [](const std::filesystem::path& path, bool features) {
        const DatasetFile file = read_dataset(path);
        py::list out;
        for (const auto& r : file.records) {
          py::dict d = record_dict(r);
          if (features) d["features"] = features_array(r.features);
          out.append(d);
        }
        return out;
      },
      py::arg("path"), py::arg("features") = false);

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<std::filesystem::path>(), py::arg("checkpoint"))
      .def("predict_file", &Predictor::predict_file, py::arg("path"), py::arg("crops") = 0)
      .def_property_readonly("config", &Predictor::config_text);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
