#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gnnlab/graph.hpp"
#include "gnnlab/types.hpp"

namespace gnnlab {

using ValueId = std::int32_t;

enum class ParamRole { weight, bn_gamma, bn_shift, omega };
std::string to_string(ParamRole role);

enum class LossKind { half_mse, cross_entropy };
std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

// Primitive applications recorded by the forward pass. Each names its input
// and output slots in Tape::values.
namespace prim {

struct Propagate {
  ValueId in, out;
  std::int32_t op;  // index into Tape::operators
};
// out = in * W
struct WeightRight {
  ValueId in, weight, out;
};
// out = diag(w) * in, w is v x 1
struct WeightRows {
  ValueId in, weight, out;
};
// out = a*x + b*y
struct Combine {
  ValueId x, y, out;
  double a, b;
};
// out = s*x + (1-s)*y with s a learnable 1x1 value
struct ScalarMix {
  ValueId x, y, scalar, out;
};
struct Relu {
  ValueId in, out;
};
// Column-wise normalization over nodes. batch_stats=false means fixed
// (running) statistics, which makes the map affine.
struct BatchNorm {
  ValueId in, gamma, shift, out;
  bool batch_stats;
  double epsilon;
  RowVector mean;
  RowVector var;
};
// out = mask .* in (dropout multipliers already include 1/(1-p))
struct Mask {
  ValueId in, out;
  Matrix mask;
};

}  // namespace prim

using Primitive = std::variant<prim::Propagate, prim::WeightRight, prim::WeightRows, prim::Combine,
                               prim::ScalarMix, prim::Relu, prim::BatchNorm, prim::Mask>;

std::string primitive_name(const Primitive& p);

struct PrimitiveRecord {
  Primitive op;
  int layer;
};

struct ParameterSlot {
  int layer;
  ParamRole role;
  ValueId value;
};

// Recorded forward pass. Recording methods compute the value eagerly, check it
// is finite and append the primitive; backward() walks the records in reverse.
class Tape {
 public:
  ValueId add_input(Matrix x);
  ValueId add_parameter(int layer, ParamRole role, Matrix value);

  // Layer index attached to subsequently recorded primitives.
  void set_layer(int layer) noexcept { layer_ = layer; }
  int layer() const noexcept { return layer_; }

  ValueId propagate(ValueId in, std::shared_ptr<const PropagationOperator> op);
  ValueId weight_right(ValueId in, ValueId weight);
  ValueId weight_rows(ValueId in, ValueId weight);
  ValueId combine(ValueId x, ValueId y, double a, double b);
  ValueId scalar_mix(ValueId x, ValueId y, ValueId scalar);
  ValueId relu(ValueId in);
  ValueId batch_norm(ValueId in, ValueId gamma, ValueId shift, double epsilon);
  ValueId batch_norm_fixed(ValueId in, ValueId gamma, ValueId shift, const RowVector& mean,
                           const RowVector& var, double epsilon);
  ValueId mask(ValueId in, Matrix mask);

  const Matrix& value(ValueId id) const { return values_.at(static_cast<std::size_t>(id)); }
  Matrix& mutable_value(ValueId id) { return values_.at(static_cast<std::size_t>(id)); }
  std::size_t num_values() const noexcept { return values_.size(); }

  const std::vector<PrimitiveRecord>& records() const noexcept { return records_; }
  const std::vector<ParameterSlot>& parameters() const noexcept { return parameters_; }
  const std::vector<std::shared_ptr<const PropagationOperator>>& operators() const noexcept {
    return operators_;
  }

  ValueId input() const noexcept { return input_; }
  ValueId output() const noexcept { return output_; }
  void set_output(ValueId id) noexcept { output_ = id; }

  // Output value of each layer, and its input value.
  std::vector<ValueId> layer_inputs;
  std::vector<ValueId> layer_outputs;
  // Operator index used by each layer's propagation (-1 if none).
  std::vector<std::int32_t> layer_operator;

  // Recomputes every recorded value from the input and the current parameter
  // values; returns the output. Reproduces the recording bitwise.
  const Matrix& replay();

 private:
  ValueId push(Matrix value);
  std::int32_t intern(std::shared_ptr<const PropagationOperator> op);
  void evaluate(PrimitiveRecord& rec);

  std::vector<Matrix> values_;
  std::vector<PrimitiveRecord> records_;
  std::vector<ParameterSlot> parameters_;
  std::vector<std::shared_ptr<const PropagationOperator>> operators_;
  ValueId input_ = -1;
  ValueId output_ = -1;
  int layer_ = -1;
};

struct GradReport {
  double loss = 0.0;
  // One entry per Tape::parameters() slot, same shape as the parameter.
  std::vector<Matrix> gradients;
  // ||dL/dW||_2 (Frobenius) per weight slot, in layer order.
  std::vector<double> layer_norms;
  std::vector<int> weight_layers;
};

// Loss value and dL/d(output). `rows` restricts the loss to a node subset
// (empty = all nodes); the mean runs over the selected rows.
double loss_value(const Matrix& output, const Matrix& target, LossKind kind,
                  std::span<const Index> rows = {});
Matrix loss_gradient(const Matrix& output, const Matrix& target, LossKind kind,
                     std::span<const Index> rows = {});

// Adjoints of every tape value given dL/d(output). Throws NumericError
// naming the primitive that produced a non-finite adjoint.
std::vector<Matrix> backward_adjoints(const Tape& tape, const Matrix& output_adjoint);

// Gradients of L(W) = (1/(2n)) sum_i ||X_i^{(N)} - Y_i||^2 (or cross-entropy)
// for every registered parameter. ReLU derivative at 0 is 0.
GradReport backward(const Tape& tape, const Matrix& target, LossKind kind = LossKind::half_mse,
                    std::span<const Index> rows = {});

}  // namespace gnnlab
