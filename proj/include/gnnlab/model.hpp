#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gnnlab/autodiff.hpp"
#include "gnnlab/graph.hpp"

namespace gnnlab {

enum class Activation { identity, relu };
enum class Mode { train, eval };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

// Dense weights are in x out and multiply from the right. Node-wise weights
// (scalar-feature form) are v x 1 and scale node rows: diag(w) X.
struct Weight {
  Matrix values;
  bool nodewise = false;

  // Infinity norm: max absolute row sum (dense) or max |w_k| (node-wise).
  double inf_norm() const;
};

// X' = act(P X W)
struct GcnLayer {
  Weight weight;
  Activation activation = Activation::relu;
};

// `order` weight-free propagation steps. alpha > 0 adds the initial residual
// X' = (1-alpha) P X + alpha X_in, with X_in the input of this layer.
struct SgcPropagation {
  int order = 1;
  double alpha = 0.0;
};

// X' = act(X W)
struct MlpLayer {
  Weight weight;
  Activation activation = Activation::relu;
};

enum class GcnIIPlacement {
  // X' = act(((1-a) P X + a X0)((1-b) I + b W))
  combined,
  // Z' = act((1-a) Z((1-b) I + b W) + a Z0), no propagation
  training,
};

struct GcnIILayer {
  Weight weight;
  double alpha = 0.1;
  double beta = 0.5;
  Activation activation = Activation::relu;
  GcnIIPlacement placement = GcnIIPlacement::combined;
};

// Full-batch normalization of each feature column over the nodes.
struct BatchNormLayer {
  RowVector gamma;
  RowVector shift;
  RowVector running_mean;
  RowVector running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;
  Activation activation = Activation::identity;
};

// One propagation step over an operator resampled with DropEdge (train mode);
// eval mode uses the full operator.
struct DropEdgeLayer {
  double keep_prob = 0.7;
  Activation activation = Activation::identity;
};

// X' = act(P X W) + X
struct ResGcnLayer {
  Weight weight;
  Activation activation = Activation::relu;
};

// X' = act((omega P + (1-omega) I) X W)
struct OmegaGcnLayer {
  Weight weight;
  double omega = 0.5;
  bool learn_omega = false;
  Activation activation = Activation::relu;
};

// Element dropout with inverted scaling; identity in eval mode.
struct DropoutLayer {
  double ratio = 0.6;
};

using Layer = std::variant<GcnLayer, SgcPropagation, MlpLayer, GcnIILayer, BatchNormLayer,
                           DropEdgeLayer, ResGcnLayer, OmegaGcnLayer, DropoutLayer>;

std::string layer_name(const Layer& layer);
const Weight* layer_weight(const Layer& layer);
Weight* layer_weight(Layer& layer);

struct ModelSpec {
  std::vector<Layer> layers;
  // X0 seen by GcnII layers is the output of this layer (-1: the model input).
  int initial_feature_layer = -1;
  LossKind loss = LossKind::half_mse;
  DropEdgeDegrees dropedge_degrees = DropEdgeDegrees::resampled;
  // Index of the first training-side layer in decoupled specs (-1 if coupled).
  int training_start = -1;
  // Non-fatal notes, e.g. trick placements argued to be not meaningful.
  std::vector<std::string> advisories;

  // Validates parameter ranges and the width chain; returns the output width.
  // Throws ShapeError / ContractError.
  Index validate(Index num_nodes, Index input_width) const;
  // Weighted layers in order (the per-layer gradient-flow entries).
  std::vector<int> weighted_layers() const;
  bool has_stochastic_layers() const;
  bool has_mode_dependent_layers() const;
};

struct ParamRef {
  int layer;
  ParamRole role;
  double* data;
  Index rows;
  Index cols;

  Eigen::Map<Matrix> view() const { return {data, rows, cols}; }
};

// Learnable parameters in tape registration order.
std::vector<ParamRef> parameters(ModelSpec& spec);

struct ForwardResult {
  Matrix output;
  Tape tape;
};

// Records the forward pass. DropEdge and dropout draw from streams derived
// from (seed, layer index) in train mode only. BatchNorm uses batch statistics
// in train mode and running statistics in eval mode.
ForwardResult forward(const ModelSpec& spec, const PropagationOperator& op, const Matrix& x0, Mode mode,
                      std::uint64_t seed = 0);

// Moves BatchNorm running statistics toward the batch statistics of a train-mode tape.
void update_running_stats(ModelSpec& spec, const Tape& tape);

// Uniform Glorot initialization of every dense weight; node-wise weights untouched.
void glorot_initialize(ModelSpec& spec, std::uint64_t seed);

// GCNII identity-mapping strength for 1-based layer index: log(lambda/l + 1).
double gcnii_beta(int layer, double lambda = 0.5);

enum class ModelKind { gcn, gcnii, resgcn, omega_gcn, gcn_batchnorm, gcn_dropedge };
std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct DeepModelOptions {
  Index input_width = 16;
  Index hidden_width = 16;
  Index output_width = 4;
  int depth = 2;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  double lambda = 0.5;
  double omega = 0.5;
  double keep_prob = 0.7;
};

// Deep models with dense weights, Glorot-initialized.
//   gcn / gcn_batchnorm / gcn_dropedge / omega_gcn: depth propagation layers, in -> hidden -> ... -> out
//   resgcn: same, with identity skips on the hidden -> hidden layers
//   gcnii: input MLP, depth GCNII layers, output MLP (X0 = input MLP output)
ModelSpec make_model(ModelKind kind, const DeepModelOptions& opts);

struct NodewiseOptions {
  double alpha = 0.1;
  double lambda = 0.5;
  double omega = 0.5;
  double keep_prob = 0.7;
};

// Scalar-feature (m = 1) node-wise models: every layer carries a v x 1 weight
// and follows X_i' = act(sum_j P_ij W_j X_j) or the kind's variant of it.
// `weights[n]` is the weight of layer n + 1. The final layer is linear.
ModelSpec make_nodewise_model(ModelKind kind, const std::vector<Vector>& weights,
                              const NodewiseOptions& opts = {});

enum class Trick { none, gcnii_prop, gcnii_train, bn_prop, bn_train, dropedge_prop, dropout_train };
std::string to_string(Trick t);
Trick parse_trick(const std::string& text);

struct DecoupledOptions {
  Index input_width = 16;
  Index hidden_width = 16;
  Index output_width = 4;
  double alpha = 0.1;
  double lambda = 0.5;
  double keep_prob = 0.7;
  double dropout_ratio = 0.6;
  Activation mlp_activation = Activation::relu;
  std::uint64_t seed = 0;
};

// SGC-MLP: K propagation steps, one weight, then L MLP weights,
// Z = P^K X W W_1 ... W_L, with `trick` injected on the chosen side.
ModelSpec build_decoupled_spec(int propagation_order, int mlp_depth, Trick trick,
                               const DecoupledOptions& opts);

}  // namespace gnnlab
