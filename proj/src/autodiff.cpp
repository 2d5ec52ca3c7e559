#include "gnnlab/autodiff.hpp"

#include <cmath>

#include "gnnlab/error.hpp"

namespace gnnlab {

std::string to_string(ParamRole role) {
  switch (role) {
    case ParamRole::weight: return "weight";
    case ParamRole::bn_gamma: return "bn_gamma";
    case ParamRole::bn_shift: return "bn_shift";
    case ParamRole::omega: return "omega";
  }
  return "unknown";
}

std::string to_string(LossKind kind) {
  return kind == LossKind::half_mse ? "half_mse" : "cross_entropy";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "half_mse" || text == "mse" || text == "l2") return LossKind::half_mse;
  if (text == "cross_entropy" || text == "ce") return LossKind::cross_entropy;
  throw ContractError("unknown loss '" + text + "'");
}

std::string primitive_name(const Primitive& p) {
  struct Namer {
    const char* operator()(const prim::Propagate&) const { return "propagate"; }
    const char* operator()(const prim::WeightRight&) const { return "weight_right"; }
    const char* operator()(const prim::WeightRows&) const { return "weight_rows"; }
    const char* operator()(const prim::Combine&) const { return "combine"; }
    const char* operator()(const prim::ScalarMix&) const { return "scalar_mix"; }
    const char* operator()(const prim::Relu&) const { return "relu"; }
    const char* operator()(const prim::BatchNorm&) const { return "batch_norm"; }
    const char* operator()(const prim::Mask&) const { return "mask"; }
  };
  return std::visit(Namer{}, p);
}

ValueId Tape::push(Matrix value) {
  values_.push_back(std::move(value));
  return static_cast<ValueId>(values_.size() - 1);
}

ValueId Tape::add_input(Matrix x) {
  input_ = push(std::move(x));
  return input_;
}

ValueId Tape::add_parameter(int layer, ParamRole role, Matrix value) {
  ValueId id = push(std::move(value));
  parameters_.push_back({layer, role, id});
  return id;
}

std::int32_t Tape::intern(std::shared_ptr<const PropagationOperator> op) {
  for (std::size_t i = 0; i < operators_.size(); ++i) {
    if (operators_[i] == op) return static_cast<std::int32_t>(i);
  }
  operators_.push_back(std::move(op));
  return static_cast<std::int32_t>(operators_.size() - 1);
}

namespace {

void check_finite(const Matrix& m, const PrimitiveRecord& rec, const char* stage) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite ") + stage + " in layer " + std::to_string(rec.layer) +
                           " (" + primitive_name(rec.op) + ")",
                       rec.layer, primitive_name(rec.op));
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

void Tape::evaluate(PrimitiveRecord& rec) {
  auto& vals = values_;
  auto at = [&](ValueId id) -> Matrix& { return vals[static_cast<std::size_t>(id)]; };
  ValueId out = std::visit(
      [&](auto& p) -> ValueId {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, prim::Propagate>) {
          const auto& op = *operators_[static_cast<std::size_t>(p.op)];
          require(at(p.in).rows() == op.size(), "propagate: rows != v");
          at(p.out) = op.matrix * at(p.in);
        } else if constexpr (std::is_same_v<T, prim::WeightRight>) {
          require(at(p.in).cols() == at(p.weight).rows(), "weight: in-width mismatch");
          at(p.out) = at(p.in) * at(p.weight);
        } else if constexpr (std::is_same_v<T, prim::WeightRows>) {
          require(at(p.weight).cols() == 1 && at(p.weight).rows() == at(p.in).rows(),
                  "node-wise weight must be v x 1");
          at(p.out) = at(p.weight).col(0).asDiagonal() * at(p.in);
        } else if constexpr (std::is_same_v<T, prim::Combine>) {
          require(at(p.x).rows() == at(p.y).rows() && at(p.x).cols() == at(p.y).cols(),
                  "combine: shape mismatch");
          at(p.out) = p.a * at(p.x) + p.b * at(p.y);
        } else if constexpr (std::is_same_v<T, prim::ScalarMix>) {
          require(at(p.x).rows() == at(p.y).rows() && at(p.x).cols() == at(p.y).cols(),
                  "scalar mix: shape mismatch");
          const double s = at(p.scalar)(0, 0);
          at(p.out) = s * at(p.x) + (1.0 - s) * at(p.y);
        } else if constexpr (std::is_same_v<T, prim::Relu>) {
          at(p.out) = at(p.in).cwiseMax(0.0);
        } else if constexpr (std::is_same_v<T, prim::BatchNorm>) {
          const Matrix& x = at(p.in);
          require(at(p.gamma).cols() == x.cols() && at(p.shift).cols() == x.cols(),
                  "batch norm: width mismatch");
          if (p.batch_stats) {
            const double n = static_cast<double>(x.rows());
            p.mean = x.colwise().sum() / n;
            p.var = (x.rowwise() - p.mean).array().square().colwise().sum() / n;
          }
          RowVector inv = (p.var.array() + p.epsilon).rsqrt();
          Matrix xhat = (x.rowwise() - p.mean).array().rowwise() * inv.array();
          at(p.out) = (xhat.array().rowwise() * at(p.gamma).row(0).array()).matrix().rowwise() +
                      at(p.shift).row(0);
        } else if constexpr (std::is_same_v<T, prim::Mask>) {
          require(p.mask.rows() == at(p.in).rows() && p.mask.cols() == at(p.in).cols(),
                  "mask: shape mismatch");
          at(p.out) = at(p.in).cwiseProduct(p.mask);
        }
        return p.out;
      },
      rec.op);
  check_finite(at(out), rec, "value");
}

const Matrix& Tape::replay() {
  for (auto& rec : records_) evaluate(rec);
  return value(output_);
}

ValueId Tape::propagate(ValueId in, std::shared_ptr<const PropagationOperator> op) {
  const std::int32_t idx = intern(std::move(op));
  ValueId out = push(Matrix());
  records_.push_back({prim::Propagate{in, out, idx}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::weight_right(ValueId in, ValueId weight) {
  ValueId out = push(Matrix());
  records_.push_back({prim::WeightRight{in, weight, out}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::weight_rows(ValueId in, ValueId weight) {
  ValueId out = push(Matrix());
  records_.push_back({prim::WeightRows{in, weight, out}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::combine(ValueId x, ValueId y, double a, double b) {
  ValueId out = push(Matrix());
  records_.push_back({prim::Combine{x, y, out, a, b}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::scalar_mix(ValueId x, ValueId y, ValueId scalar) {
  ValueId out = push(Matrix());
  records_.push_back({prim::ScalarMix{x, y, scalar, out}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::relu(ValueId in) {
  ValueId out = push(Matrix());
  records_.push_back({prim::Relu{in, out}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::batch_norm(ValueId in, ValueId gamma, ValueId shift, double epsilon) {
  ValueId out = push(Matrix());
  records_.push_back({prim::BatchNorm{in, gamma, shift, out, true, epsilon, {}, {}}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::batch_norm_fixed(ValueId in, ValueId gamma, ValueId shift, const RowVector& mean,
                               const RowVector& var, double epsilon) {
  ValueId out = push(Matrix());
  records_.push_back({prim::BatchNorm{in, gamma, shift, out, false, epsilon, mean, var}, layer_});
  evaluate(records_.back());
  return out;
}

ValueId Tape::mask(ValueId in, Matrix mask) {
  ValueId out = push(Matrix());
  records_.push_back({prim::Mask{in, out, std::move(mask)}, layer_});
  evaluate(records_.back());
  return out;
}

namespace {

std::vector<Index> all_rows(Index n) {
  std::vector<Index> r(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = i;
  return r;
}

RowVector softmax_row(const RowVector& z) {
  RowVector e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

double loss_value(const Matrix& output, const Matrix& target, LossKind kind,
                  std::span<const Index> rows) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw ShapeError("loss: target shape does not match output");
  }
  std::vector<Index> all;
  if (rows.empty()) {
    all = all_rows(output.rows());
    rows = all;
  }
  const double n = static_cast<double>(rows.size());
  double sum = 0.0;
  for (Index i : rows) {
    if (kind == LossKind::half_mse) {
      sum += 0.5 * (output.row(i) - target.row(i)).squaredNorm();
    } else {
      const RowVector z = output.row(i);
      const double m = z.maxCoeff();
      const double lse = m + std::log((z.array() - m).exp().sum());
      sum += -(target.row(i).array() * (z.array() - lse)).sum();
    }
  }
  return sum / n;
}

Matrix loss_gradient(const Matrix& output, const Matrix& target, LossKind kind,
                     std::span<const Index> rows) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw ShapeError("loss: target shape does not match output");
  }
  std::vector<Index> all;
  if (rows.empty()) {
    all = all_rows(output.rows());
    rows = all;
  }
  const double n = static_cast<double>(rows.size());
  Matrix g = Matrix::Zero(output.rows(), output.cols());
  for (Index i : rows) {
    if (kind == LossKind::half_mse) {
      g.row(i) = (output.row(i) - target.row(i)) / n;
    } else {
      // d/dz of -sum_c y_c log softmax(z)_c for a (possibly unnormalized) label row.
      g.row(i) = (target.row(i).sum() * softmax_row(output.row(i)) - target.row(i)) / n;
    }
  }
  return g;
}

std::vector<Matrix> backward_adjoints(const Tape& tape, const Matrix& output_adjoint) {
  const Matrix& out = tape.value(tape.output());
  if (output_adjoint.rows() != out.rows() || output_adjoint.cols() != out.cols()) {
    throw ShapeError("backward: adjoint shape does not match output");
  }
  std::vector<Matrix> adj(tape.num_values());
  auto accumulate = [&](ValueId id, const Matrix& g) {
    auto& a = adj[static_cast<std::size_t>(id)];
    if (a.size() == 0) {
      a = g;
    } else {
      a += g;
    }
  };
  accumulate(tape.output(), output_adjoint);

  const auto& recs = tape.records();
  for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
    const PrimitiveRecord& rec = *it;
    std::visit(
        [&](const auto& p) {
          const Matrix& g = adj[static_cast<std::size_t>(p.out)];
          if (g.size() == 0) return;  // output does not reach the loss
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, prim::Propagate>) {
            const auto& op = *tape.operators()[static_cast<std::size_t>(p.op)];
            Matrix gin = op.matrix.transpose() * g;
            check_finite(gin, rec, "adjoint");
            accumulate(p.in, gin);
          } else if constexpr (std::is_same_v<T, prim::WeightRight>) {
            const Matrix& x = tape.value(p.in);
            const Matrix& w = tape.value(p.weight);
            Matrix gw = x.transpose() * g;
            Matrix gin = g * w.transpose();
            check_finite(gw, rec, "adjoint");
            check_finite(gin, rec, "adjoint");
            accumulate(p.weight, gw);
            accumulate(p.in, gin);
          } else if constexpr (std::is_same_v<T, prim::WeightRows>) {
            const Matrix& x = tape.value(p.in);
            const Matrix& w = tape.value(p.weight);
            Matrix gw = x.cwiseProduct(g).rowwise().sum();
            Matrix gin = w.col(0).asDiagonal() * g;
            check_finite(gw, rec, "adjoint");
            check_finite(gin, rec, "adjoint");
            accumulate(p.weight, gw);
            accumulate(p.in, gin);
          } else if constexpr (std::is_same_v<T, prim::Combine>) {
            // Same-slot operands (x == y) accumulate twice, as they should.
            accumulate(p.x, p.a * g);
            accumulate(p.y, p.b * g);
          } else if constexpr (std::is_same_v<T, prim::ScalarMix>) {
            const double s = tape.value(p.scalar)(0, 0);
            Matrix gs(1, 1);
            gs(0, 0) = (tape.value(p.x) - tape.value(p.y)).cwiseProduct(g).sum();
            check_finite(gs, rec, "adjoint");
            accumulate(p.scalar, gs);
            accumulate(p.x, s * g);
            accumulate(p.y, (1.0 - s) * g);
          } else if constexpr (std::is_same_v<T, prim::Relu>) {
            const Matrix& x = tape.value(p.in);
            accumulate(p.in, (x.array() > 0.0).select(g, 0.0).matrix());
          } else if constexpr (std::is_same_v<T, prim::BatchNorm>) {
            const Matrix& x = tape.value(p.in);
            const RowVector gamma = tape.value(p.gamma).row(0);
            const RowVector inv = (p.var.array() + p.epsilon).rsqrt();
            const Matrix xhat = (x.rowwise() - p.mean).array().rowwise() * inv.array();
            Matrix ggamma = g.cwiseProduct(xhat).colwise().sum();
            Matrix gshift = g.colwise().sum();
            Matrix gin;
            if (p.batch_stats) {
              const double n = static_cast<double>(x.rows());
              const RowVector sum_g = gshift.row(0);
              const RowVector sum_gx = ggamma.row(0);
              // dx = gamma*inv/n * (n*g - sum(g) - xhat*sum(g*xhat)), per column.
              Matrix centered = (n * g).rowwise() - sum_g;
              centered -= (xhat.array().rowwise() * sum_gx.array()).matrix();
              gin = centered.array().rowwise() * (gamma.array() * inv.array() / n);
            } else {
              gin = g.array().rowwise() * (gamma.array() * inv.array());
            }
            check_finite(gin, rec, "adjoint");
            check_finite(ggamma, rec, "adjoint");
            accumulate(p.gamma, ggamma);
            accumulate(p.shift, gshift);
            accumulate(p.in, gin);
          } else if constexpr (std::is_same_v<T, prim::Mask>) {
            accumulate(p.in, g.cwiseProduct(p.mask));
          }
        },
        rec.op);
  }
  return adj;
}

GradReport backward(const Tape& tape, const Matrix& target, LossKind kind,
                    std::span<const Index> rows) {
  const Matrix& out = tape.value(tape.output());
  GradReport report;
  report.loss = loss_value(out, target, kind, rows);
  auto adj = backward_adjoints(tape, loss_gradient(out, target, kind, rows));
  for (const auto& slot : tape.parameters()) {
    const Matrix& param = tape.value(slot.value);
    Matrix& g = adj[static_cast<std::size_t>(slot.value)];
    report.gradients.push_back(g.size() == 0 ? Matrix::Zero(param.rows(), param.cols()) : g);
    if (slot.role == ParamRole::weight) {
      report.layer_norms.push_back(report.gradients.back().norm());
      report.weight_layers.push_back(slot.layer);
    }
  }
  return report;
}

}  // namespace gnnlab
