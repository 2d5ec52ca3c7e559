#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gnnlab/bounds.hpp"
#include "gnnlab/error.hpp"
#include "gnnlab/experiments.hpp"
#include "gnnlab/gradcheck.hpp"
#include "gnnlab/smoothing.hpp"

namespace py = pybind11;
using namespace gnnlab;

namespace {

py::object to_python(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json from_python(const py::object& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Graph graph_from(const std::vector<NodePair>& edges, Index v) { return build_graph(edges, v); }

ModelKind kind_of(const std::string& s) { return parse_model_kind(s); }

BoundInputs inputs_from(const py::dict& d) {
  BoundInputs in;
  in.gamma = d["gamma"].cast<double>();
  in.num_nodes = d["num_nodes"].cast<Index>();
  in.delta = d["delta"].cast<double>();
  in.weight_norms = d["weight_norms"].cast<std::vector<double>>();
  in.feature_norms = d["feature_norms"].cast<std::vector<double>>();
  if (d.contains("x0_norm")) in.x0_norm = d["x0_norm"].cast<double>();
  if (d.contains("alpha")) in.alpha = d["alpha"].cast<double>();
  if (d.contains("beta")) in.beta = d["beta"].cast<std::vector<double>>();
  if (d.contains("bn_scale")) in.bn_scale = d["bn_scale"].cast<std::vector<double>>();
  if (d.contains("dropedge_delta")) in.dropedge_delta = d["dropedge_delta"].cast<std::vector<double>>();
  if (d.contains("omega")) in.omega = d["omega"].cast<double>();
  return in;
}

BoundRow row_of(const std::string& s) {
  for (BoundRow r : {BoundRow::gcn, BoundRow::gcnii, BoundRow::batchnorm, BoundRow::dropedge, BoundRow::resgcn,
                     BoundRow::omega_gcn}) {
    if (to_string(r) == s) return r;
  }
  return bound_row_for(parse_model_kind(s));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "gnnlab core: propagation, smoothing diagnostics, gradients and bounds";
  m.attr("__version__") = kVersion;

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  m.def(
      "normalized_operator",
      [](const std::vector<NodePair>& edges, Index v) { return normalized_operator(graph_from(edges, v)).dense(); },
      py::arg("edges"), py::arg("num_nodes"), "Dense D^-1/2 (A + I) D^-1/2.");

  m.def(
      "synthetic_edges",
      [](const std::string& spec, std::uint64_t seed) {
        auto g = generate_synthetic(parse_synthetic(spec, seed));
        return py::make_tuple(g.graph.edges(), g.graph.num_nodes(), g.blocks);
      },
      py::arg("spec"), py::arg("seed") = 0, "Edges, node count and block ids of a synthetic graph.");

  m.def(
      "spectral_gap",
      [](const std::vector<NodePair>& edges, Index v) {
        return spectral_summary(normalized_operator(graph_from(edges, v))).spectral_gap;
      },
      py::arg("edges"), py::arg("num_nodes"));

  m.def(
      "dirichlet_energy",
      [](const std::vector<NodePair>& edges, Index v, const Matrix& x) {
        return dirichlet_energy(graph_from(edges, v), x);
      },
      py::arg("edges"), py::arg("num_nodes"), py::arg("x"));

  m.def(
      "energy_trajectory",
      [](const std::vector<NodePair>& edges, Index v, const Matrix& x, int steps) {
        Graph g = graph_from(edges, v);
        return energy_trajectory(g, normalized_operator(g), x, steps);
      },
      py::arg("edges"), py::arg("num_nodes"), py::arg("x"), py::arg("steps"));

  m.def(
      "mixing_time",
      [](const std::vector<NodePair>& edges, Index v, double eps) {
        MixingReport r = mixing_time_empirical(graph_from(edges, v), eps);
        py::dict d;
        d["t_mix"] = r.t_mix;
        d["lower_bound"] = r.lower_bound;
        d["upper_bound"] = r.upper_bound;
        d["contained"] = r.contained;
        d["distance"] = r.distance;
        return d;
      },
      py::arg("edges"), py::arg("num_nodes"), py::arg("epsilon"));

  m.def(
      "nodewise_forward",
      [](const std::string& kind, const std::vector<Vector>& weights, const std::vector<NodePair>& edges, Index v,
         const Matrix& x0, const Matrix& y) {
        auto op = normalized_operator(graph_from(edges, v));
        auto spec = make_nodewise_model(kind_of(kind), weights);
        auto f = forward(spec, op, x0, Mode::train, 0);
        auto g = backward(f.tape, y);
        return py::make_tuple(f.output, g.loss, g.gradients);
      },
      py::arg("kind"), py::arg("weights"), py::arg("edges"), py::arg("num_nodes"), py::arg("x0"), py::arg("y"),
      "Output, loss and weight gradients of a scalar-feature node-wise model.");

  m.def(
      "finite_difference_check",
      [](const std::string& kind, int depth, int width, const std::string& graph, std::uint64_t seed) {
        auto g = generate_synthetic(parse_synthetic(graph, seed)).graph;
        auto op = normalized_operator(g);
        DeepModelOptions o;
        o.input_width = width;
        o.hidden_width = width;
        o.output_width = 2;
        o.depth = depth;
        o.seed = seed;
        auto spec = make_model(kind_of(kind), o);
        Rng rng = make_rng(seed, 3);
        std::normal_distribution<double> n(0.0, 1.0);
        Matrix x(g.num_nodes(), width), y(g.num_nodes(), 2);
        for (Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
        for (Index i = 0; i < y.size(); ++i) y.data()[i] = n(rng);
        auto r = finite_difference_check(spec, op, x, y, 1e-5, seed);
        return py::make_tuple(r.max_relative_error, r.checked, r.skipped_kinks);
      },
      py::arg("kind"), py::arg("depth"), py::arg("width"), py::arg("graph"), py::arg("seed") = 0);

  m.def(
      "bound",
      [](const std::string& row, const py::dict& inputs, int layer) {
        BoundTerms t = evaluate_bound(row_of(row), inputs_from(inputs), layer);
        py::dict d;
        d["value"] = t.value;
        d["prefactor"] = t.prefactor;
        d["smoothing"] = t.smoothing;
        d["training"] = t.training;
        d["feature"] = t.feature;
        return d;
      },
      py::arg("row"), py::arg("inputs"), py::arg("layer"), "Evaluate one bound row at a 1-based layer.");

  m.def(
      "bound_sweep",
      [](const std::string& kind, int instances, std::uint64_t seed) {
        SweepSummary s = bound_sweep(kind_of(kind), instances, seed);
        py::dict d;
        d["instances"] = s.instances;
        d["violations"] = s.violations;
        d["min_margin"] = s.min_margin;
        d["max_ratio"] = s.max_ratio;
        return d;
      },
      py::arg("kind"), py::arg("instances"), py::arg("seed") = 0);

  m.def(
      "run",
      [](const py::object& config) {
        RunConfig c;
        from_json(from_python(config), c);
        ReportBundle b = run_command(c);
        return to_python(b.summary);
      },
      py::arg("config"), "Run a command from a config dict; returns the summary without writing files.");

  m.def(
      "run_to_dir",
      [](const py::object& config) {
        RunConfig c;
        from_json(from_python(config), c);
        ReportBundle b = run_command(c);
        write_bundle(b, c.out);
        return b.exit_code;
      },
      py::arg("config"));
}
