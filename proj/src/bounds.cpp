#include "gnnlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gnnlab/error.hpp"
#include "gnnlab/parallel.hpp"
#include "gnnlab/random.hpp"

namespace gnnlab {

std::string to_string(BoundRow row) {
  switch (row) {
    case BoundRow::gcn: return "gcn";
    case BoundRow::gcnii: return "gcnii";
    case BoundRow::batchnorm: return "gcn_bn";
    case BoundRow::dropedge: return "gcn_dropedge";
    case BoundRow::resgcn: return "resgcn";
    case BoundRow::omega_gcn: return "omegagcn";
  }
  return "unknown";
}

BoundRow bound_row_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::gcn: return BoundRow::gcn;
    case ModelKind::gcnii: return BoundRow::gcnii;
    case ModelKind::resgcn: return BoundRow::resgcn;
    case ModelKind::omega_gcn: return BoundRow::omega_gcn;
    case ModelKind::gcn_batchnorm: return BoundRow::batchnorm;
    case ModelKind::gcn_dropedge: return BoundRow::dropedge;
  }
  throw ContractError("no bound row for model");
}

namespace {

void check_nonneg(double x, const char* what) {
  if (!std::isfinite(x) || x < 0.0) throw ContractError(std::string("bound input ") + what + " must be finite and >= 0");
}

void check_extras(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n) throw ContractError(std::string("bound input ") + what + " missing or wrong length");
  for (double x : v) check_nonneg(x, what);
}

void check_layer(const BoundInputs& in, int layer) {
  in.validate();
  if (layer < 1 || layer > in.depth()) throw ContractError("bound target layer out of range");
}

std::size_t at(int n) { return static_cast<std::size_t>(n - 1); }

BoundTerms finish(const BoundInputs& in, double smoothing, double training, double feature) {
  BoundTerms t;
  t.prefactor = in.gamma / static_cast<double>(in.num_nodes);
  t.smoothing = smoothing;
  t.training = training;
  t.feature = feature;
  t.value = t.prefactor * smoothing * training * feature;
  return t;
}

double weight_product(const BoundInputs& in, int layer) {
  double p = 1.0;
  for (int n = layer + 1; n <= in.depth(); ++n) p *= in.weight_norms[at(n)];
  return p;
}

}  // namespace

void BoundInputs::validate() const {
  check_nonneg(gamma, "gamma");
  check_nonneg(delta, "delta");
  check_nonneg(x0_norm, "x0_norm");
  if (delta > 1.0) throw ContractError("bound input delta must lie in [0, 1]");
  if (num_nodes < 1) throw ContractError("bound input num_nodes must be >= 1");
  if (weight_norms.empty()) throw ContractError("bound input needs at least one layer");
  check_extras(weight_norms, weight_norms.size(), "weight_norms");
  check_extras(feature_norms, weight_norms.size(), "feature_norms");
}

BoundTerms gcn_bound(const BoundInputs& in, int layer) {
  check_layer(in, layer);
  const int N = in.depth();
  return finish(in, std::pow(in.delta, N - layer + 1), weight_product(in, layer), in.feature_norms[at(layer)]);
}

BoundTerms gcnii_bound(const BoundInputs& in, int layer) {
  check_layer(in, layer);
  if (!in.alpha) throw ContractError("gcnii bound needs alpha");
  check_extras(in.beta, in.weight_norms.size(), "beta");
  const double a = *in.alpha;
  const int N = in.depth();
  double training = 1.0;
  for (int n = layer + 1; n <= N; ++n) {
    training *= (1.0 - in.beta[at(n)]) + in.beta[at(n)] * in.weight_norms[at(n)];
  }
  const double b = in.beta[at(layer)];
  const double feature = b * in.feature_norms[at(layer)] + a * b * in.x0_norm;
  return finish(in, std::pow((1.0 - a) * in.delta, N - layer), training, feature);
}

BoundTerms bn_bound(const BoundInputs& in, int layer) {
  check_layer(in, layer);
  check_extras(in.bn_scale, in.weight_norms.size(), "bn_scale");
  const int N = in.depth();
  double training = 1.0;
  for (int n = layer + 1; n <= N; ++n) training *= in.bn_scale[at(n)] * in.weight_norms[at(n)];
  return finish(in, std::pow(in.delta, N - layer + 1), training,
                in.bn_scale[at(layer)] * in.feature_norms[at(layer)]);
}

BoundTerms dropedge_bound(const BoundInputs& in, int layer) {
  check_layer(in, layer);
  check_extras(in.dropedge_delta, in.weight_norms.size(), "dropedge_delta");
  double smoothing = 1.0;
  for (int n = layer; n <= in.depth(); ++n) smoothing *= in.dropedge_delta[at(n)];
  return finish(in, smoothing, weight_product(in, layer), in.feature_norms[at(layer)]);
}

// The residual row does not factor; its product prod(Δ||W|| + 1) is reported
// as the training term and the trailing Δ as the smoothing term.
BoundTerms resgcn_bound(const BoundInputs& in, int layer) {
  check_layer(in, layer);
  double training = 1.0;
  for (int n = layer + 1; n <= in.depth(); ++n) training *= in.delta * in.weight_norms[at(n)] + 1.0;
  return finish(in, in.delta, training, in.feature_norms[at(layer)]);
}

BoundTerms omegagcn_bound(const BoundInputs& in, int layer) {
  check_layer(in, layer);
  if (!in.omega) throw ContractError("omegagcn bound needs omega");
  const double w = *in.omega;
  const int N = in.depth();
  return finish(in, std::pow(w * in.delta + 1.0 - w, N - layer + 1), weight_product(in, layer),
                in.feature_norms[at(layer)]);
}

BoundTerms evaluate_bound(BoundRow row, const BoundInputs& in, int layer) {
  switch (row) {
    case BoundRow::gcn: return gcn_bound(in, layer);
    case BoundRow::gcnii: return gcnii_bound(in, layer);
    case BoundRow::batchnorm: return bn_bound(in, layer);
    case BoundRow::dropedge: return dropedge_bound(in, layer);
    case BoundRow::resgcn: return resgcn_bound(in, layer);
    case BoundRow::omega_gcn: return omegagcn_bound(in, layer);
  }
  throw ContractError("unknown bound row");
}

double summed_bound(BoundRow row, const BoundInputs& in) {
  double s = 0.0;
  for (int l = 1; l <= in.depth(); ++l) s += evaluate_bound(row, in, l).value;
  return s;
}

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

BoundReport verify_bounds(ModelKind kind, const ModelSpec& spec, const PropagationOperator& op,
                          const Matrix& x0, const Matrix& y, std::uint64_t seed) {
  if (x0.cols() != 1 || y.cols() != 1) {
    throw ContractError("node-wise bounds are stated for scalar features (m = 1) only");
  }
  const auto wl = spec.weighted_layers();
  if (wl.empty()) throw ContractError("verify_bounds: model has no weighted layers");
  for (int l : wl) {
    if (!layer_weight(spec.layers[static_cast<std::size_t>(l)])->nodewise) {
      throw ContractError("verify_bounds needs node-wise weights");
    }
  }

  auto fwd = forward(spec, op, x0, Mode::train, seed);
  const Tape& tape = fwd.tape;
  const GradReport grads = backward(tape, y, LossKind::half_mse);

  BoundReport rep;
  rep.row = bound_row_for(kind);
  BoundInputs& in = rep.inputs;
  in.gamma = max_abs(fwd.output) + max_abs(y);
  in.num_nodes = op.size();
  in.delta = op.delta;
  in.x0_norm = max_abs(x0);

  const int N = static_cast<int>(wl.size());
  const int layers_total = static_cast<int>(spec.layers.size());
  for (int n = 0; n < N; ++n) {
    const int first = wl[static_cast<std::size_t>(n)];
    const int last = n + 1 < N ? wl[static_cast<std::size_t>(n) + 1] : layers_total;
    in.weight_norms.push_back(layer_weight(spec.layers[static_cast<std::size_t>(first)])->inf_norm());
    in.feature_norms.push_back(max_abs(tape.value(tape.layer_inputs[static_cast<std::size_t>(first)])));

    for (int s = first; s < last; ++s) {
      const Layer& layer = spec.layers[static_cast<std::size_t>(s)];
      if (const auto* g = std::get_if<GcnIILayer>(&layer)) {
        in.alpha = g->alpha;
        in.beta.push_back(g->beta);
      } else if (const auto* o = std::get_if<OmegaGcnLayer>(&layer)) {
        in.omega = o->omega;
      } else if (std::holds_alternative<DropEdgeLayer>(layer)) {
        const auto idx = tape.layer_operator[static_cast<std::size_t>(s)];
        in.dropedge_delta.push_back(tape.operators().at(static_cast<std::size_t>(idx))->delta);
      }
    }
    for (const auto& r : tape.records()) {
      const auto* bn = std::get_if<prim::BatchNorm>(&r.op);
      if (!bn || r.layer < first || r.layer >= last) continue;
      const double gamma = std::abs(tape.value(bn->gamma)(0, 0));
      in.bn_scale.push_back(gamma / std::sqrt(bn->var(0) + bn->epsilon));
    }
  }

  rep.min_margin = std::numeric_limits<double>::infinity();
  std::size_t w = 0;
  for (std::size_t s = 0; s < tape.parameters().size(); ++s) {
    if (tape.parameters()[s].role != ParamRole::weight) continue;
    LayerBound lb;
    lb.layer = static_cast<int>(++w);
    lb.terms = evaluate_bound(rep.row, in, lb.layer);
    lb.empirical = max_abs(grads.gradients[s]);
    lb.margin = lb.terms.value - lb.empirical;
    rep.min_margin = std::min(rep.min_margin, lb.margin);
    rep.layers.push_back(lb);
  }
  return rep;
}

BoundInstance random_bound_instance(ModelKind kind, const BoundSweepConfig& cfg, std::uint64_t seed) {
  if (cfg.min_nodes < 2 || cfg.max_nodes < cfg.min_nodes) throw ContractError("bad node range for sweep");
  if (cfg.min_depth < 1 || cfg.max_depth < cfg.min_depth) throw ContractError("bad depth range for sweep");
  // The stream ignores `kind` so every model sees the same instances.
  Rng rng = make_rng(seed, 0xb0d5);
  const Index v = std::uniform_int_distribution<Index>(cfg.min_nodes, cfg.max_nodes)(rng);
  const int depth = std::uniform_int_distribution<int>(cfg.min_depth, cfg.max_depth)(rng);

  std::bernoulli_distribution coin(cfg.edge_prob);
  std::vector<NodePair> edges;
  for (Index i = 0; i < v; ++i)
    for (Index j = i + 1; j < v; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  {
    Graph g = build_graph(edges, v);
    const auto comp = g.components();
    std::vector<Index> heads;
    for (Index i = 0; i < v; ++i) {
      if (static_cast<std::size_t>(comp[static_cast<std::size_t>(i)]) == heads.size()) heads.push_back(i);
    }
    for (std::size_t c = 1; c < heads.size(); ++c) edges.emplace_back(heads[c - 1], heads[c]);
  }

  BoundInstance inst;
  inst.kind = kind;
  inst.seed = seed;
  inst.graph = std::make_shared<const Graph>(build_graph(edges, v));
  std::uniform_real_distribution<double> unif(-cfg.weight_scale, cfg.weight_scale);
  std::normal_distribution<double> gauss(0.0, 1.0);
  inst.weights.resize(static_cast<std::size_t>(depth));
  for (auto& w : inst.weights) {
    w.resize(v);
    for (Index k = 0; k < v; ++k) w(k) = unif(rng);
  }
  inst.x0.resize(v, 1);
  inst.y.resize(v, 1);
  for (Index k = 0; k < v; ++k) inst.x0(k, 0) = gauss(rng);
  for (Index k = 0; k < v; ++k) inst.y(k, 0) = gauss(rng);
  return inst;
}

BoundReport verify_instance(const BoundInstance& inst) {
  const PropagationOperator op = normalized_operator(*inst.graph);
  const ModelSpec spec = make_nodewise_model(inst.kind, inst.weights, inst.options);
  return verify_bounds(inst.kind, spec, op, inst.x0, inst.y, inst.seed);
}

SweepSummary bound_sweep(ModelKind kind, int instances, std::uint64_t seed, const BoundSweepConfig& cfg,
                         int jobs) {
  if (instances < 0) throw ContractError("sweep size must be non-negative");
  SweepSummary sum;
  sum.kind = kind;
  sum.instances = instances;
  sum.reports.resize(static_cast<std::size_t>(instances));
  parallel_for(sum.reports.size(), jobs, [&](std::size_t i) {
    sum.reports[i] = verify_instance(random_bound_instance(kind, cfg, derive_seed(seed, i)));
  });
  sum.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sum.reports.size(); ++i) {
    const auto& r = sum.reports[i];
    sum.min_margin = std::min(sum.min_margin, r.min_margin);
    if (!r.sound()) {
      ++sum.violations;
      if (sum.first_violation < 0) sum.first_violation = static_cast<int>(i);
    }
    for (const auto& l : r.layers) {
      if (l.terms.value > 0.0) sum.max_ratio = std::max(sum.max_ratio, l.empirical / l.terms.value);
    }
  }
  return sum;
}

namespace {

double open_unit(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = 0.0;
  while (x == 0.0) x = u(rng);
  return x;
}

}  // namespace

OrderingSample ordering_sample(const BoundSweepConfig& cfg, std::uint64_t seed) {
  BoundSweepConfig c = cfg;
  c.min_depth = std::max(c.min_depth, 2);
  c.max_depth = std::max(c.max_depth, c.min_depth);
  const BoundInstance inst = random_bound_instance(ModelKind::gcn, c, seed);
  const PropagationOperator op = normalized_operator(*inst.graph);
  Rng rng = make_rng(seed, 0x0cde);
  std::uniform_real_distribution<double> wnorm(1.0, 1.0 + 2.0 * c.weight_scale);
  std::uniform_real_distribution<double> fnorm(0.1, 3.0);

  OrderingSample s;
  BoundInputs& in = s.inputs;
  const int N = static_cast<int>(inst.weights.size());
  in.num_nodes = op.size();
  in.delta = op.delta;
  in.gamma = fnorm(rng) + fnorm(rng);
  for (int n = 0; n < N; ++n) in.weight_norms.push_back(wnorm(rng));
  for (int n = 0; n < N; ++n) in.feature_norms.push_back(fnorm(rng));
  in.x0_norm = in.feature_norms.front();
  in.alpha = open_unit(rng);
  in.beta.assign(static_cast<std::size_t>(N), open_unit(rng));
  in.omega = open_unit(rng);

  s.resgcn = summed_bound(BoundRow::resgcn, in);
  s.gcn = summed_bound(BoundRow::gcn, in);
  s.gcnii = summed_bound(BoundRow::gcnii, in);
  s.omega_gcn = summed_bound(BoundRow::omega_gcn, in);
  s.layers = N;
  for (int l = 1; l <= N; ++l) {
    const double r = resgcn_bound(in, l).value, g = gcn_bound(in, l).value;
    s.res_gt_gcn_layers += r > g;
    s.gcn_gt_gcnii_layers += g > gcnii_bound(in, l).value;
    s.gcn_gt_omega_layers += g > omegagcn_bound(in, l).value;
  }
  return s;
}

OrderingSummary bound_ordering(int samples, std::uint64_t seed, const BoundSweepConfig& cfg) {
  OrderingSummary sum;
  sum.samples = samples;
  for (int i = 0; i < samples; ++i) {
    OrderingSample s = ordering_sample(cfg, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const bool rg = s.resgcn > s.gcn, gi = s.gcn > s.gcnii, go = s.gcn > s.omega_gcn;
    sum.res_gt_gcn += rg;
    sum.gcn_gt_gcnii += gi;
    sum.gcn_gt_omega += go;
    sum.chain_gcnii += rg && gi;
    sum.chain_omega += rg && go;
    sum.details.push_back(std::move(s));
  }
  return sum;
}

}  // namespace gnnlab
