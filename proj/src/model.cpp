#include "gnnlab/model.hpp"

#include <cmath>

#include "gnnlab/error.hpp"
#include "gnnlab/random.hpp"

namespace gnnlab {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "identity" || text == "none" || text == "linear") return Activation::identity;
  throw ContractError("unknown activation '" + text + "'");
}

double Weight::inf_norm() const {
  if (values.size() == 0) return 0.0;
  if (nodewise) return values.cwiseAbs().maxCoeff();
  return values.cwiseAbs().rowwise().sum().maxCoeff();
}

std::string layer_name(const Layer& layer) {
  struct Namer {
    const char* operator()(const GcnLayer&) const { return "gcn"; }
    const char* operator()(const SgcPropagation&) const { return "sgc"; }
    const char* operator()(const MlpLayer&) const { return "mlp"; }
    const char* operator()(const GcnIILayer&) const { return "gcnii"; }
    const char* operator()(const BatchNormLayer&) const { return "batchnorm"; }
    const char* operator()(const DropEdgeLayer&) const { return "dropedge"; }
    const char* operator()(const ResGcnLayer&) const { return "resgcn"; }
    const char* operator()(const OmegaGcnLayer&) const { return "omegagcn"; }
    const char* operator()(const DropoutLayer&) const { return "dropout"; }
  };
  return std::visit(Namer{}, layer);
}

const Weight* layer_weight(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> const Weight* {
        if constexpr (requires { l.weight; }) {
          return &l.weight;
        } else {
          return nullptr;
        }
      },
      layer);
}

Weight* layer_weight(Layer& layer) {
  return const_cast<Weight*>(layer_weight(static_cast<const Layer&>(layer)));
}

namespace {

void check_unit(double x, const char* name, int layer) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw ContractError(std::string(name) + " must lie in [0, 1] (layer " + std::to_string(layer) + ")");
  }
}

// Applies the weight to a width-`width` input; returns the output width.
Index chain_weight(const Weight& w, Index v, Index width, int layer) {
  if (w.nodewise) {
    if (w.values.rows() != v || w.values.cols() != 1) {
      throw ShapeError("node-wise weight of layer " + std::to_string(layer) + " must be v x 1");
    }
    return width;
  }
  if (w.values.rows() != width) {
    throw ShapeError("weight of layer " + std::to_string(layer) + " expects in-width " +
                     std::to_string(w.values.rows()) + ", got " + std::to_string(width));
  }
  return w.values.cols();
}

}  // namespace

Index ModelSpec::validate(Index num_nodes, Index input_width) const {
  Index width = input_width;
  Index x0_width = initial_feature_layer < 0 ? input_width : -1;
  for (int l = 0; l < static_cast<int>(layers.size()); ++l) {
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, GcnLayer> || std::is_same_v<T, MlpLayer>) {
            width = chain_weight(layer.weight, num_nodes, width, l);
          } else if constexpr (std::is_same_v<T, SgcPropagation>) {
            if (layer.order < 0) throw ContractError("propagation order must be >= 0");
            check_unit(layer.alpha, "alpha", l);
          } else if constexpr (std::is_same_v<T, GcnIILayer>) {
            check_unit(layer.alpha, "alpha", l);
            check_unit(layer.beta, "beta", l);
            if (x0_width < 0) throw ContractError("GCNII layer precedes its initial-feature layer");
            if (x0_width != width) throw ShapeError("GCNII initial features width mismatch");
            if (chain_weight(layer.weight, num_nodes, width, l) != width) {
              throw ShapeError("GCNII weight must be square");
            }
          } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
            if (layer.gamma.size() != width || layer.shift.size() != width ||
                layer.running_mean.size() != width || layer.running_var.size() != width) {
              throw ShapeError("batch norm width mismatch at layer " + std::to_string(l));
            }
          } else if constexpr (std::is_same_v<T, DropEdgeLayer>) {
            if (!(layer.keep_prob > 0.0 && layer.keep_prob <= 1.0)) {
              throw ContractError("keep_prob must lie in (0, 1]");
            }
          } else if constexpr (std::is_same_v<T, ResGcnLayer>) {
            if (chain_weight(layer.weight, num_nodes, width, l) != width) {
              throw ShapeError("ResGCN weight must be square");
            }
          } else if constexpr (std::is_same_v<T, OmegaGcnLayer>) {
            if (!layer.learn_omega) check_unit(layer.omega, "omega", l);
            width = chain_weight(layer.weight, num_nodes, width, l);
          } else if constexpr (std::is_same_v<T, DropoutLayer>) {
            if (!(layer.ratio >= 0.0 && layer.ratio < 1.0)) {
              throw ContractError("dropout ratio must lie in [0, 1)");
            }
          }
        },
        layers[static_cast<std::size_t>(l)]);
    if (l == initial_feature_layer) x0_width = width;
  }
  return width;
}

std::vector<int> ModelSpec::weighted_layers() const {
  std::vector<int> out;
  for (int l = 0; l < static_cast<int>(layers.size()); ++l) {
    if (layer_weight(layers[static_cast<std::size_t>(l)])) out.push_back(l);
  }
  return out;
}

bool ModelSpec::has_stochastic_layers() const {
  for (const auto& l : layers) {
    if (std::holds_alternative<DropEdgeLayer>(l) || std::holds_alternative<DropoutLayer>(l)) return true;
  }
  return false;
}

bool ModelSpec::has_mode_dependent_layers() const {
  for (const auto& l : layers) {
    if (std::holds_alternative<BatchNormLayer>(l)) return true;
  }
  return has_stochastic_layers();
}

namespace {

ParamRef ref(int layer, ParamRole role, Matrix& m) { return {layer, role, m.data(), m.rows(), m.cols()}; }
ParamRef ref(int layer, ParamRole role, RowVector& m) { return {layer, role, m.data(), 1, m.size()}; }

}  // namespace

std::vector<ParamRef> parameters(ModelSpec& spec) {
  std::vector<ParamRef> out;
  for (int l = 0; l < static_cast<int>(spec.layers.size()); ++l) {
    auto& layer = spec.layers[static_cast<std::size_t>(l)];
    if (Weight* w = layer_weight(layer)) out.push_back(ref(l, ParamRole::weight, w->values));
    if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      out.push_back(ref(l, ParamRole::bn_gamma, bn->gamma));
      out.push_back(ref(l, ParamRole::bn_shift, bn->shift));
    }
    if (auto* om = std::get_if<OmegaGcnLayer>(&layer); om && om->learn_omega) {
      out.push_back({l, ParamRole::omega, &om->omega, 1, 1});
    }
  }
  return out;
}

namespace {

class Recorder {
 public:
  Recorder(const ModelSpec& spec, const PropagationOperator& op, Mode mode, std::uint64_t seed)
      : spec_(spec), mode_(mode), seed_(seed), base_(std::make_shared<const PropagationOperator>(op)) {}

  ForwardResult run(const Matrix& x0) {
    ForwardResult res;
    Tape& tape = res.tape;
    tape_ = &tape;
    ValueId x = tape.add_input(x0);
    ValueId anchor = spec_.initial_feature_layer < 0 ? x : -1;
    const auto n = spec_.layers.size();
    tape.layer_inputs.resize(n);
    tape.layer_outputs.resize(n);
    tape.layer_operator.assign(n, -1);
    for (std::size_t l = 0; l < n; ++l) {
      layer_ = static_cast<int>(l);
      tape.set_layer(layer_);
      tape.layer_inputs[l] = x;
      x = std::visit([&](const auto& layer) { return apply(layer, x, anchor); }, spec_.layers[l]);
      tape.layer_outputs[l] = x;
      if (layer_ == spec_.initial_feature_layer) anchor = x;
    }
    tape.set_output(x);
    res.output = tape.value(x);
    return res;
  }

 private:
  ValueId weight_param(const Weight& w) {
    return tape_->add_parameter(layer_, ParamRole::weight, w.values);
  }

  ValueId apply_weight(const Weight& w, ValueId in, ValueId param) {
    return w.nodewise ? tape_->weight_rows(in, param) : tape_->weight_right(in, param);
  }

  ValueId activate(Activation a, ValueId in) { return a == Activation::relu ? tape_->relu(in) : in; }

  ValueId propagate(ValueId in, const std::shared_ptr<const PropagationOperator>& op) {
    ValueId out = tape_->propagate(in, op);
    // Operators are interned; the latest entry matching `op` is this one.
    const auto& ops = tape_->operators();
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (ops[i] == op) tape_->layer_operator[static_cast<std::size_t>(layer_)] = static_cast<std::int32_t>(i);
    }
    return out;
  }

  Rng layer_rng() const { return make_rng(seed_, static_cast<std::uint64_t>(layer_) + 1); }

  ValueId apply(const GcnLayer& l, ValueId x, ValueId) {
    ValueId w = weight_param(l.weight);
    return activate(l.activation, propagate(apply_weight(l.weight, x, w), base_));
  }

  ValueId apply(const SgcPropagation& l, ValueId x, ValueId) {
    const ValueId start = x;
    for (int k = 0; k < l.order; ++k) {
      ValueId p = propagate(x, base_);
      x = l.alpha > 0.0 ? tape_->combine(p, start, 1.0 - l.alpha, l.alpha) : p;
    }
    return x;
  }

  ValueId apply(const MlpLayer& l, ValueId x, ValueId) {
    ValueId w = weight_param(l.weight);
    return activate(l.activation, apply_weight(l.weight, x, w));
  }

  ValueId apply(const GcnIILayer& l, ValueId x, ValueId anchor) {
    ValueId w = weight_param(l.weight);
    if (l.placement == GcnIIPlacement::combined) {
      ValueId h = propagate(x, base_);
      if (l.alpha > 0.0) h = tape_->combine(h, anchor, 1.0 - l.alpha, l.alpha);
      ValueId hw = apply_weight(l.weight, h, w);
      return activate(l.activation, tape_->combine(h, hw, 1.0 - l.beta, l.beta));
    }
    ValueId xw = apply_weight(l.weight, x, w);
    ValueId mapped = tape_->combine(x, xw, 1.0 - l.beta, l.beta);
    ValueId mixed = l.alpha > 0.0 ? tape_->combine(mapped, anchor, 1.0 - l.alpha, l.alpha) : mapped;
    return activate(l.activation, mixed);
  }

  ValueId apply(const BatchNormLayer& l, ValueId x, ValueId) {
    ValueId gamma = tape_->add_parameter(layer_, ParamRole::bn_gamma, l.gamma);
    ValueId shift = tape_->add_parameter(layer_, ParamRole::bn_shift, l.shift);
    ValueId y = mode_ == Mode::train
                    ? tape_->batch_norm(x, gamma, shift, l.epsilon)
                    : tape_->batch_norm_fixed(x, gamma, shift, l.running_mean, l.running_var, l.epsilon);
    return activate(l.activation, y);
  }

  ValueId apply(const DropEdgeLayer& l, ValueId x, ValueId) {
    if (mode_ == Mode::eval || l.keep_prob == 1.0) return activate(l.activation, propagate(x, base_));
    Rng rng = layer_rng();
    auto sampled = std::make_shared<const PropagationOperator>(
        drop_edge_operator(*base_->graph, l.keep_prob, rng, spec_.dropedge_degrees));
    return activate(l.activation, propagate(x, sampled));
  }

  ValueId apply(const ResGcnLayer& l, ValueId x, ValueId) {
    ValueId w = weight_param(l.weight);
    ValueId a = activate(l.activation, propagate(apply_weight(l.weight, x, w), base_));
    return tape_->combine(a, x, 1.0, 1.0);
  }

  ValueId apply(const OmegaGcnLayer& l, ValueId x, ValueId) {
    ValueId w = weight_param(l.weight);
    ValueId z = apply_weight(l.weight, x, w);
    ValueId p = propagate(z, base_);
    ValueId mixed;
    if (l.learn_omega) {
      Matrix om(1, 1);
      om(0, 0) = l.omega;
      ValueId s = tape_->add_parameter(layer_, ParamRole::omega, om);
      mixed = tape_->scalar_mix(p, z, s);
    } else {
      mixed = tape_->combine(p, z, l.omega, 1.0 - l.omega);
    }
    return activate(l.activation, mixed);
  }

  ValueId apply(const DropoutLayer& l, ValueId x, ValueId) {
    if (mode_ == Mode::eval || l.ratio == 0.0) return x;
    Rng rng = layer_rng();
    std::bernoulli_distribution keep(1.0 - l.ratio);
    const Matrix& in = tape_->value(x);
    Matrix mask(in.rows(), in.cols());
    const double scale = 1.0 / (1.0 - l.ratio);
    // Row-major draw order keeps masks independent of storage layout.
    for (Index i = 0; i < mask.rows(); ++i)
      for (Index j = 0; j < mask.cols(); ++j) mask(i, j) = keep(rng) ? scale : 0.0;
    return tape_->mask(x, std::move(mask));
  }

  const ModelSpec& spec_;
  Mode mode_;
  std::uint64_t seed_;
  std::shared_ptr<const PropagationOperator> base_;
  Tape* tape_ = nullptr;
  int layer_ = 0;
};

}  // namespace

ForwardResult forward(const ModelSpec& spec, const PropagationOperator& op, const Matrix& x0, Mode mode,
                      std::uint64_t seed) {
  if (x0.rows() != op.size()) throw ShapeError("forward: X0 rows != v");
  spec.validate(op.size(), x0.cols());
  Recorder rec(spec, op, mode, seed);
  return rec.run(x0);
}

void update_running_stats(ModelSpec& spec, const Tape& tape) {
  for (const auto& r : tape.records()) {
    const auto* bn = std::get_if<prim::BatchNorm>(&r.op);
    if (!bn || !bn->batch_stats) continue;
    auto& layer = std::get<BatchNormLayer>(spec.layers.at(static_cast<std::size_t>(r.layer)));
    const double n = static_cast<double>(tape.value(bn->in).rows());
    const RowVector unbiased = n > 1 ? RowVector(bn->var * (n / (n - 1.0))) : bn->var;
    layer.running_mean = (1.0 - layer.momentum) * layer.running_mean + layer.momentum * bn->mean;
    layer.running_var = (1.0 - layer.momentum) * layer.running_var + layer.momentum * unbiased;
  }
}

void glorot_initialize(ModelSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x6107);
  for (auto& layer : spec.layers) {
    Weight* w = layer_weight(layer);
    if (!w || w->nodewise) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(w->values.rows() + w->values.cols()));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (Index i = 0; i < w->values.rows(); ++i)
      for (Index j = 0; j < w->values.cols(); ++j) w->values(i, j) = unif(rng);
  }
}

double gcnii_beta(int layer, double lambda) {
  if (layer < 1) throw ContractError("GCNII layer index is 1-based");
  return std::log(lambda / static_cast<double>(layer) + 1.0);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gcn: return "gcn";
    case ModelKind::gcnii: return "gcnii";
    case ModelKind::resgcn: return "resgcn";
    case ModelKind::omega_gcn: return "omegagcn";
    case ModelKind::gcn_batchnorm: return "gcn_bn";
    case ModelKind::gcn_dropedge: return "gcn_dropedge";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "gcn") return ModelKind::gcn;
  if (text == "gcnii") return ModelKind::gcnii;
  if (text == "resgcn") return ModelKind::resgcn;
  if (text == "omegagcn" || text == "omega_gcn" || text == "wgcn") return ModelKind::omega_gcn;
  if (text == "gcn_bn" || text == "gcn_batchnorm") return ModelKind::gcn_batchnorm;
  if (text == "gcn_dropedge" || text == "gcn_de") return ModelKind::gcn_dropedge;
  throw ContractError("unknown model '" + text + "'");
}

namespace {

Weight dense(Index in, Index out) { return {Matrix::Zero(in, out), false}; }

BatchNormLayer batch_norm(Index width, Activation act) {
  BatchNormLayer bn;
  bn.gamma = RowVector::Ones(width);
  bn.shift = RowVector::Zero(width);
  bn.running_mean = RowVector::Zero(width);
  bn.running_var = RowVector::Ones(width);
  bn.activation = act;
  return bn;
}

}  // namespace

ModelSpec make_model(ModelKind kind, const DeepModelOptions& o) {
  if (o.depth < 1) throw ContractError("model depth must be >= 1");
  ModelSpec spec;
  const int n = o.depth;
  auto in_of = [&](int l) { return l == 0 ? o.input_width : o.hidden_width; };
  auto out_of = [&](int l) { return l == n - 1 ? o.output_width : o.hidden_width; };
  auto act_of = [&](int l) { return l == n - 1 ? Activation::identity : Activation::relu; };

  switch (kind) {
    case ModelKind::gcn:
      for (int l = 0; l < n; ++l) spec.layers.push_back(GcnLayer{dense(in_of(l), out_of(l)), act_of(l)});
      break;
    case ModelKind::resgcn:
      for (int l = 0; l < n; ++l) {
        if (l == 0 || l == n - 1 || in_of(l) != out_of(l)) {
          spec.layers.push_back(GcnLayer{dense(in_of(l), out_of(l)), act_of(l)});
        } else {
          spec.layers.push_back(ResGcnLayer{dense(in_of(l), out_of(l)), Activation::relu});
        }
      }
      break;
    case ModelKind::omega_gcn:
      for (int l = 0; l < n; ++l) {
        spec.layers.push_back(OmegaGcnLayer{dense(in_of(l), out_of(l)), o.omega, false, act_of(l)});
      }
      break;
    case ModelKind::gcn_batchnorm:
      for (int l = 0; l < n; ++l) {
        spec.layers.push_back(GcnLayer{dense(in_of(l), out_of(l)), Activation::identity});
        if (l != n - 1) spec.layers.push_back(batch_norm(out_of(l), Activation::relu));
      }
      break;
    case ModelKind::gcn_dropedge:
      for (int l = 0; l < n; ++l) {
        spec.layers.push_back(MlpLayer{dense(in_of(l), out_of(l)), Activation::identity});
        spec.layers.push_back(DropEdgeLayer{o.keep_prob, act_of(l)});
      }
      break;
    case ModelKind::gcnii:
      spec.layers.push_back(MlpLayer{dense(o.input_width, o.hidden_width), Activation::relu});
      spec.initial_feature_layer = 0;
      for (int l = 1; l <= n; ++l) {
        spec.layers.push_back(GcnIILayer{dense(o.hidden_width, o.hidden_width), o.alpha,
                                         gcnii_beta(l, o.lambda), Activation::relu,
                                         GcnIIPlacement::combined});
      }
      spec.layers.push_back(MlpLayer{dense(o.hidden_width, o.output_width), Activation::identity});
      break;
  }
  glorot_initialize(spec, o.seed);
  return spec;
}

ModelSpec make_nodewise_model(ModelKind kind, const std::vector<Vector>& weights,
                              const NodewiseOptions& o) {
  if (weights.empty()) throw ContractError("node-wise model needs at least one layer");
  ModelSpec spec;
  const int n = static_cast<int>(weights.size());
  for (int l = 0; l < n; ++l) {
    Weight w{Matrix(weights[static_cast<std::size_t>(l)]), true};
    const Activation act = l == n - 1 ? Activation::identity : Activation::relu;
    switch (kind) {
      case ModelKind::gcn: spec.layers.push_back(GcnLayer{w, act}); break;
      case ModelKind::resgcn: spec.layers.push_back(ResGcnLayer{w, act}); break;
      case ModelKind::omega_gcn: spec.layers.push_back(OmegaGcnLayer{w, o.omega, false, act}); break;
      case ModelKind::gcnii:
        spec.layers.push_back(
            GcnIILayer{w, o.alpha, gcnii_beta(l + 1, o.lambda), act, GcnIIPlacement::combined});
        break;
      case ModelKind::gcn_batchnorm:
        spec.layers.push_back(GcnLayer{w, Activation::identity});
        spec.layers.push_back(batch_norm(1, act));
        break;
      case ModelKind::gcn_dropedge:
        spec.layers.push_back(MlpLayer{w, Activation::identity});
        spec.layers.push_back(DropEdgeLayer{o.keep_prob, act});
        break;
    }
  }
  return spec;
}

std::string to_string(Trick t) {
  switch (t) {
    case Trick::none: return "none";
    case Trick::gcnii_prop: return "gcnii_prop";
    case Trick::gcnii_train: return "gcnii_train";
    case Trick::bn_prop: return "bn_prop";
    case Trick::bn_train: return "bn_train";
    case Trick::dropedge_prop: return "dropedge_prop";
    case Trick::dropout_train: return "dropout_train";
  }
  return "unknown";
}

Trick parse_trick(const std::string& text) {
  for (Trick t : {Trick::none, Trick::gcnii_prop, Trick::gcnii_train, Trick::bn_prop, Trick::bn_train,
                  Trick::dropedge_prop, Trick::dropout_train}) {
    if (to_string(t) == text) return t;
  }
  throw ContractError("unknown trick '" + text + "'");
}

ModelSpec build_decoupled_spec(int k, int l_mlp, Trick trick, const DecoupledOptions& o) {
  if (k < 0 || l_mlp < 0) throw ContractError("K and L must be non-negative");
  ModelSpec spec;

  // Propagation side.
  switch (trick) {
    case Trick::gcnii_prop:
      if (k > 0) spec.layers.push_back(SgcPropagation{k, o.alpha});
      break;
    case Trick::bn_prop:
      spec.advisories.push_back(
          "bn_prop: batch normalization on the weight-free propagation side has no parameters to regulate");
      for (int s = 0; s < k; ++s) {
        spec.layers.push_back(SgcPropagation{1, 0.0});
        spec.layers.push_back(batch_norm(o.input_width, Activation::identity));
      }
      break;
    case Trick::dropedge_prop:
      for (int s = 0; s < k; ++s) spec.layers.push_back(DropEdgeLayer{o.keep_prob, Activation::identity});
      break;
    default:
      if (k > 0) spec.layers.push_back(SgcPropagation{k, 0.0});
      break;
  }
  spec.training_start = static_cast<int>(spec.layers.size());

  // Training side: W then W_1..W_L.
  const int weights = l_mlp + 1;
  for (int w = 0; w < weights; ++w) {
    const bool last = w == weights - 1;
    const Index in = w == 0 ? o.input_width : o.hidden_width;
    const Index out = last ? o.output_width : o.hidden_width;
    const Activation act = last ? Activation::identity : o.mlp_activation;
    const bool gcnii_row = trick == Trick::gcnii_train && w > 0 && !last;
    if (gcnii_row) {
      spec.layers.push_back(GcnIILayer{dense(in, out), o.alpha, gcnii_beta(w, o.lambda), act,
                                       GcnIIPlacement::training});
      continue;
    }
    if (trick == Trick::bn_train && !last) {
      spec.layers.push_back(MlpLayer{dense(in, out), Activation::identity});
      spec.layers.push_back(batch_norm(out, act));
      continue;
    }
    spec.layers.push_back(MlpLayer{dense(in, out), act});
    if (w == 0 && trick == Trick::gcnii_train) {
      // Z^{(0)} = X^{(K)} W anchors the initial residual.
      spec.initial_feature_layer = static_cast<int>(spec.layers.size()) - 1;
    }
    if (trick == Trick::dropout_train && !last) spec.layers.push_back(DropoutLayer{o.dropout_ratio});
  }
  glorot_initialize(spec, o.seed);
  return spec;
}

}  // namespace gnnlab
