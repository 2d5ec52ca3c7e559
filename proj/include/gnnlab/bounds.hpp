#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gnnlab/model.hpp"

namespace gnnlab {

enum class BoundRow { gcn, gcnii, batchnorm, dropedge, resgcn, omega_gcn };
std::string to_string(BoundRow row);
BoundRow bound_row_for(ModelKind kind);

// Quantities entering the node-wise bounds. Per-layer vectors hold entry n-1
// for layer n = 1..N; feature_norms[l-1] is ||X^{(l-1)}||_inf.
struct BoundInputs {
  double gamma = 0.0;  // max_i |X_i^{(N)}| + max_i |Y_i|
  Index num_nodes = 0;
  double delta = 0.0;
  std::vector<double> weight_norms;
  std::vector<double> feature_norms;
  double x0_norm = 0.0;

  std::optional<double> alpha;                  // GCNII
  std::vector<double> beta;                     // GCNII, per layer
  std::vector<double> bn_scale;                 // gamma / sigma_BN per layer
  std::vector<double> dropedge_delta;           // realized Δ̃ per layer
  std::optional<double> omega;                  // ωGCN

  int depth() const noexcept { return static_cast<int>(weight_norms.size()); }
  // Throws ContractError on negative or non-finite entries and size mismatches.
  void validate() const;
};

struct BoundTerms {
  double prefactor = 0.0;  // Γ / v
  double smoothing = 0.0;
  double training = 0.0;
  double feature = 0.0;
  double value = 0.0;
};

// `layer` is the 1-based target layer l. Each throws ContractError when the
// row's extras are missing.
BoundTerms gcn_bound(const BoundInputs& in, int layer);
BoundTerms gcnii_bound(const BoundInputs& in, int layer);
BoundTerms bn_bound(const BoundInputs& in, int layer);
BoundTerms dropedge_bound(const BoundInputs& in, int layer);
BoundTerms resgcn_bound(const BoundInputs& in, int layer);
BoundTerms omegagcn_bound(const BoundInputs& in, int layer);
BoundTerms evaluate_bound(BoundRow row, const BoundInputs& in, int layer);

// Sum of the per-layer bounds: a bound on the gradient flow up to norm equivalence
// over node-wise weights.
double summed_bound(BoundRow row, const BoundInputs& in);

struct LayerBound {
  int layer = 0;  // 1-based
  BoundTerms terms;
  double empirical = 0.0;  // max_k |dL/dW_k^{(l)}|
  double margin = 0.0;     // bound - empirical
};

struct BoundReport {
  BoundRow row = BoundRow::gcn;
  BoundInputs inputs;
  std::vector<LayerBound> layers;
  double min_margin = 0.0;
  bool sound() const noexcept { return min_margin >= 0.0; }
};

// Measures node-wise gradients of a scalar-feature model built by
// make_nodewise_model(kind, ...) and evaluates the matching bound row. The
// forward runs in train mode with `seed`, so DropEdge rows use the realized
// operators and BatchNorm rows their batch statistics. Refuses m != 1.
BoundReport verify_bounds(ModelKind kind, const ModelSpec& spec, const PropagationOperator& op,
                          const Matrix& x0, const Matrix& y, std::uint64_t seed = 0);

// Random m = 1 instance for bound sweeps.
struct BoundInstance {
  ModelKind kind = ModelKind::gcn;
  std::shared_ptr<const Graph> graph;
  std::vector<Vector> weights;
  Matrix x0;
  Matrix y;
  NodewiseOptions options;
  std::uint64_t seed = 0;
};

struct BoundSweepConfig {
  Index min_nodes = 3;
  Index max_nodes = 30;
  double edge_prob = 0.3;
  int min_depth = 1;
  int max_depth = 16;
  double weight_scale = 1.5;  // W_k ~ U(-s, s)
};

// Erdős–Rényi graph joined into one component, features and targets N(0,1).
BoundInstance random_bound_instance(ModelKind kind, const BoundSweepConfig& cfg, std::uint64_t seed);
BoundReport verify_instance(const BoundInstance& inst);

struct SweepSummary {
  ModelKind kind = ModelKind::gcn;
  int instances = 0;
  int violations = 0;
  double min_margin = 0.0;
  double max_ratio = 0.0;  // max empirical / bound over layers with a positive bound
  int first_violation = -1;
  std::vector<BoundReport> reports;
};

SweepSummary bound_sweep(ModelKind kind, int instances, std::uint64_t seed, const BoundSweepConfig& cfg = {},
                         int jobs = 1);

// Matched-input comparison of the row values.
struct OrderingSample {
  BoundInputs inputs;  // carries alpha, beta, omega for every row
  double resgcn = 0.0, gcn = 0.0, gcnii = 0.0, omega_gcn = 0.0;
  // Strict per-layer comparisons, counted over layers 1..N.
  int layers = 0;
  int res_gt_gcn_layers = 0;
  int gcn_gt_gcnii_layers = 0;
  int gcn_gt_omega_layers = 0;
};

struct OrderingSummary {
  int samples = 0;
  int res_gt_gcn = 0;
  int gcn_gt_gcnii = 0;
  int gcn_gt_omega = 0;
  int chain_gcnii = 0;  // ResGCN > GCN > GCNII
  int chain_omega = 0;  // ResGCN > GCN > ωGCN
  std::vector<OrderingSample> details;
};

// Inputs in the regime ||W||_inf >= 1, alpha, beta, omega in (0,1), depth >= 2,
// Δ from a random sweep graph. Rows are compared by summed_bound.
OrderingSample ordering_sample(const BoundSweepConfig& cfg, std::uint64_t seed);
OrderingSummary bound_ordering(int samples, std::uint64_t seed, const BoundSweepConfig& cfg = {});

}  // namespace gnnlab
