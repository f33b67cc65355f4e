#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "gnmr/channels.hpp"
#include "gnmr/error.hpp"
#include "gnmr/evaluation.hpp"
#include "gnmr/graph.hpp"
#include "gnmr/model.hpp"

namespace py = pybind11;
using namespace gnmr;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const DoubleArray& a) { return {a.data(), a.data() + a.size()}; }

py::array_t<double> matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  py::array_t<double> out({rows.size(), cols});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return out;
}

// Graphs cross the boundary as JSON text; the Python side wraps json.loads.
EquipmentGraph parse_graph(const std::string& text) { return graph_from_json(nlohmann::json::parse(text)); }

class Model {
 public:
  explicit Model(const std::filesystem::path& path) : model_(load_checkpoint(path)) {}
  explicit Model(std::unique_ptr<RulModel> model) : model_(std::move(model)) {}

  static Model initialized(const std::string& graph, std::size_t hidden, std::size_t gru_layers, int steps,
                           std::uint64_t seed) {
    ModelConfig cfg;
    cfg.hidden = hidden;
    cfg.gru_layers = gru_layers;
    cfg.steps = steps;
    auto model = std::make_unique<GnmrModel>(parse_graph(graph), cfg);
    Rng rng(seed);
    model->init_parameters(rng);
    return Model(std::move(model));
  }

  void save(const std::filesystem::path& path) const { save_checkpoint(*model_, path); }

  std::string kind() const { return to_string(model_->kind()); }
  std::size_t parameter_count() const { return model_->parameter_count(); }

  std::vector<std::string> node_names() const {
    std::vector<std::string> out;
    if (const auto* g = dynamic_cast<const GnmrModel*>(model_.get())) {
      for (const auto& n : g->graph().nodes) out.push_back(n.name);
    }
    return out;
  }

  // windows: B x T x 24 normalized channels, ages: B last-cycle indices.
  py::dict predict(const DoubleArray& windows, const DoubleArray& ages) const {
    if (windows.ndim() != 3 || windows.shape(2) != static_cast<py::ssize_t>(kChannelCount)) {
      throw DimensionError("windows must have shape (B, T, 24)");
    }
    const auto b = static_cast<std::size_t>(windows.shape(0));
    const auto t = static_cast<std::size_t>(windows.shape(1));
    if (ages.ndim() != 1 || static_cast<std::size_t>(ages.shape(0)) != b) {
      throw DimensionError("ages must have shape (B,)");
    }
    std::vector<WindowSample> samples(b);
    const double* src = windows.data();
    for (std::size_t i = 0; i < b; ++i) {
      samples[i].channels.assign(src + i * t * kChannelCount, src + (i + 1) * t * kChannelCount);
      samples[i].age = ages.data()[i];
    }
    std::vector<const WindowSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);
    Inference inf;
    {
      py::gil_scoped_release release;
      inf = model_->infer(batch);
    }
    py::dict out;
    out["prediction"] = py::array_t<double>(static_cast<py::ssize_t>(b), inf.prediction.data());
    if (!inf.weights.empty()) {
      const std::size_t n = inf.weights.front().size();
      out["weights"] = matrix(inf.weights, n);
      out["node_estimates"] = matrix(inf.node_estimates, n);
    }
    return out;
  }

 private:
  std::unique_ptr<RulModel> model_;
};

}  // namespace

PYBIND11_MODULE(_gnmr, m) {
  m.doc() = "Gated graph network regression for remaining useful life";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
  py::register_exception<CompatibilityError>(m, "CompatibilityError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.attr("channel_names") = [] {
    std::vector<std::string> names;
    for (auto n : kChannelNames) names.emplace_back(n);
    return names;
  }();

  m.def("rmse", [](const DoubleArray& e) { return rmse(to_vector(e)); }, py::arg("errors"));
  m.def("timeliness_score", [](const DoubleArray& e, double u1, double u2) { return timeliness_score(to_vector(e), u1, u2); },
        py::arg("errors"), py::arg("u1") = 13.0, py::arg("u2") = 10.0);
  m.def("denormalize_prediction", &denormalize_prediction, py::arg("normalized"), py::arg("rul_cap") = 130.0,
        py::arg("clamp") = true);

  m.def("load_graph_json", [](const std::filesystem::path& p) { return graph_to_json(load_graph_config(p)).dump(); },
        py::arg("path"));
  m.def("validate_graph_json", [](const std::string& g) { validate(parse_graph(g)); }, py::arg("graph"));
  m.def("graph_hash", [](const std::string& g) { return hash_hex(graph_hash(parse_graph(g))); }, py::arg("graph"));
  m.def(
      "graph_variant_json",
      [](const std::string& g, const std::string& variant, std::uint64_t seed) {
        Rng rng(seed);
        return graph_to_json(graph_variant(parse_graph(g), variant, rng)).dump();
      },
      py::arg("graph"), py::arg("variant"), py::arg("seed") = 0);
  m.def(
      "adjacency",
      [](const std::string& g) {
        const auto adj = build_adjacency(parse_graph(g));
        py::array_t<double> in({adj.n, adj.n}), out({adj.n, adj.n});
        std::copy(adj.a_in.begin(), adj.a_in.end(), in.mutable_data());
        std::copy(adj.a_out.begin(), adj.a_out.end(), out.mutable_data());
        return py::make_tuple(in, out);
      },
      py::arg("graph"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def_static("initialized", &Model::initialized, py::arg("graph"), py::arg("hidden") = 30,
                  py::arg("gru_layers") = 2, py::arg("steps") = 2, py::arg("seed") = 0)
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("kind", &Model::kind)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("node_names", &Model::node_names)
      .def("predict", &Model::predict, py::arg("windows"), py::arg("ages"));
}
