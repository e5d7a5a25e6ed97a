#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "covact/commands.hpp"
#include "covact/covariance.hpp"
#include "covact/error.hpp"
#include "covact/io.hpp"
#include "covact/recognizer.hpp"
#include "covact/skeleton.hpp"
#include "covact/spd.hpp"

namespace py = pybind11;
using namespace covact;

namespace {

std::vector<WeightedFrame> to_frames(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& weights) {
  if (weights.size() != features.rows()) {
    throw usage_error("need one weight per feature row");
  }
  std::vector<WeightedFrame> frames;
  frames.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    frames.push_back({features.row(i).transpose(), weights(i)});
  }
  return frames;
}

SkeletonFrame to_skeleton(const Eigen::MatrixXd& joints) {
  if (joints.rows() != 3) throw usage_error("joints must be a 3 x K array");
  return {joints, std::nullopt};
}

py::dict event_dict(const RecognitionEvent& e) {
  py::dict d;
  d["frame_index"] = e.frame_index;
  d["label"] = e.label;
  d["kind"] = to_string(e.kind);
  d["min_distance"] = e.min_distance;
  d["std"] = e.std_dev;
  d["distances"] = e.distances;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Weighted covariance descriptors, Stein geometry and online recognition";

  py::register_exception<Error>(m, "CovactError", PyExc_RuntimeError);

  m.def(
      "batch_weighted_covariance",
      [](const Eigen::MatrixXd& features, const Eigen::VectorXd& weights, double decay) {
        const auto frames = to_frames(features, weights);
        const auto r = covact::batch_weighted_covariance(frames, decay);
        return py::make_tuple(r.cov, r.mean, r.weight_sum, r.weight_sq_sum);
      },
      py::arg("features"), py::arg("weights"), py::arg("decay") = kDefaultDecay,
      "Rows of `features` are frames. Returns (cov, mean, weight_sum, weight_sq_sum).");

  py::class_<WeightedCovarianceState>(m, "CovarianceState")
      .def(py::init([](const Eigen::MatrixXd& features, const Eigen::VectorXd& weights,
                       double decay) {
             return WeightedCovarianceState::initialize(to_frames(features, weights), decay);
           }),
           py::arg("features"), py::arg("weights"), py::arg("decay") = kDefaultDecay)
      .def(
          "update",
          [](WeightedCovarianceState& s, const Eigen::VectorXd& f, double w) { s.update(f, w); },
          py::arg("feature"), py::arg("weight") = 1.0)
      .def_property_readonly("cov", &WeightedCovarianceState::cov)
      .def_property_readonly("mean", &WeightedCovarianceState::mean)
      .def_property_readonly("weight_sum", &WeightedCovarianceState::weight_sum)
      .def_property_readonly("weight_sq_sum", &WeightedCovarianceState::weight_sq_sum)
      .def_property_readonly("frame_count", &WeightedCovarianceState::frame_count);

  m.def(
      "stein_divergence",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return covact::stein_divergence(SpdMatrix(x), SpdMatrix(y));
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "regularize",
      [](const Eigen::MatrixXd& x, double epsilon) { return covact::regularize(x, epsilon).matrix(); },
      py::arg("x"), py::arg("epsilon") = 1e-6);

  m.def(
      "learn_projection",
      [](const std::vector<Eigen::MatrixXd>& matrices, const std::vector<int>& labels,
         Eigen::Index target_dim, const std::string& init, std::uint64_t seed) {
        std::vector<SpdMatrix> descriptors;
        for (const auto& x : matrices) descriptors.emplace_back(x);
        ProjectionConfig config;
        if (init == "identity") {
          config.init = ProjectionInit::identity;
        } else if (init == "random") {
          config.init = ProjectionInit::random;
        } else if (init != "principal") {
          throw usage_error("unknown init '" + init + "'");
        }
        config.seed = seed;
        const auto r = covact::learn_projection(descriptors, labels, target_dim, config);
        py::dict out;
        out["projection"] = r.projection.matrix();
        out["initial_objective"] = r.initial_objective;
        out["final_objective"] = r.final_objective;
        out["iterations"] = r.iterations;
        out["converged"] = r.converged;
        return out;
      },
      py::arg("descriptors"), py::arg("labels"), py::arg("target_dim"),
      py::arg("init") = "principal", py::arg("seed") = 0);

  py::class_<JointLayout>(m, "JointLayout")
      .def_static("kinect_v1_20", &JointLayout::kinect_v1_20)
      .def_static("kinect_v2_25", &JointLayout::kinect_v2_25)
      .def_static("generic", &JointLayout::generic, py::arg("joint_count"))
      .def_readonly("hip_center", &JointLayout::hip_center)
      .def_readonly("shoulder_center", &JointLayout::shoulder_center)
      .def_readonly("spine", &JointLayout::spine)
      .def_readonly("names", &JointLayout::names)
      .def_property_readonly("joint_count", &JointLayout::joint_count)
      .def_property_readonly("feature_dim", &JointLayout::feature_dim);

  m.def(
      "normalize_skeleton",
      [](const Eigen::MatrixXd& joints, const JointLayout& layout) {
        return covact::normalize_skeleton(to_skeleton(joints), layout);
      },
      py::arg("joints"), py::arg("layout"), "joints is a 3 x K array, one column per joint.");

  m.def(
      "frame_weight",
      [](const Eigen::VectorXd& features, const Eigen::VectorXd& neutral) {
        return covact::frame_weight(features, NeutralPose{neutral});
      },
      py::arg("features"), py::arg("neutral"));

  py::class_<TrainedModel, std::shared_ptr<TrainedModel>>(m, "Model")
      .def_property_readonly("labels",
                             [](const TrainedModel& t) {
                               std::vector<int> labels;
                               for (const auto& c : t.classes) labels.push_back(c.label);
                               return labels;
                             })
      .def_property_readonly("projection", [](const TrainedModel& t) { return t.projection.matrix(); })
      .def_property_readonly("layout", [](const TrainedModel& t) { return t.layout; });

  m.def(
      "load_model",
      [](const std::filesystem::path& path) {
        return std::make_shared<TrainedModel>(covact::load_model(path));
      },
      py::arg("path"));

  py::class_<Recognizer>(m, "Recognizer")
      .def(py::init([](std::shared_ptr<TrainedModel> model) {
             return Recognizer(std::const_pointer_cast<const TrainedModel>(model));
           }),
           py::arg("model"))
      .def(
          "step",
          [](Recognizer& r, const Eigen::MatrixXd& joints) -> py::object {
            auto e = r.step(to_skeleton(joints));
            if (!e) return py::none();
            return event_dict(*e);
          },
          py::arg("joints"))
      .def_property_readonly("current_label", &Recognizer::current_label)
      .def_property_readonly("dropped_frames", &Recognizer::dropped_frames);

  m.def(
      "synth",
      [](const std::filesystem::path& out_dir, std::size_t classes, std::size_t dim,
         std::size_t instances, std::size_t frames, std::uint64_t seed) {
        SynthOptions o;
        o.out_dir = out_dir;
        o.classes = classes;
        o.dim = dim;
        o.instances = instances;
        o.frames = frames;
        o.seed = seed;
        std::ostringstream log;
        cmd_synth(o, log);
        return log.str();
      },
      py::arg("out_dir"), py::arg("classes") = 3, py::arg("dim") = 18, py::arg("instances") = 5,
      py::arg("frames") = 40, py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& neutral,
         const std::filesystem::path& out, std::optional<std::size_t> dim, double eta,
         std::size_t init_frames) {
        TrainOptions o;
        o.data = data;
        o.neutral = neutral;
        o.out = out;
        o.dim = dim;
        o.eta = eta;
        o.init_frames = init_frames;
        std::ostringstream log;
        cmd_train(o, log);
        return log.str();
      },
      py::arg("data"), py::arg("neutral"), py::arg("out"), py::arg("dim") = py::none(),
      py::arg("eta") = kDefaultDecay, py::arg("init_frames") = 30);

  m.def(
      "evaluate",
      [](const std::filesystem::path& model, const std::filesystem::path& streams,
         const std::filesystem::path& out) {
        EvaluateOptions o;
        o.model = model;
        o.streams = streams;
        o.out = out;
        std::ostringstream log;
        const MetricsReport r = cmd_evaluate(o, log);
        py::dict d;
        d["latency"] = r.mean_latency;
        d["miss_rate"] = r.miss_rate;
        d["error_rate"] = r.mean_error_rate;
        d["segments"] = r.segments;
        d["detected"] = r.detected;
        return d;
      },
      py::arg("model"), py::arg("streams"), py::arg("out"));
}
