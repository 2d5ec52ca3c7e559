#include "gnnlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "gnnlab/error.hpp"
#include "gnnlab/random.hpp"

namespace gnnlab {

void TrainConfig::validate(Index num_nodes) const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ContractError("learning rate must be finite and non-negative");
  }
  if (epochs < 0) throw ContractError("epochs must be non-negative");
  std::set<Index> seen;
  for (const auto* mask : {&train_nodes, &val_nodes, &test_nodes}) {
    for (Index i : *mask) {
      if (i < 0 || i >= num_nodes) throw ContractError("mask index out of range");
      if (!seen.insert(i).second) throw ContractError("train/val/test masks must be disjoint");
    }
  }
}

double accuracy(const Matrix& output, const Matrix& target, std::span<const Index> rows) {
  if (rows.empty()) return 0.0;
  Index hits = 0;
  for (Index i : rows) {
    Index pred = 0, truth = 0;
    output.row(i).maxCoeff(&pred);
    target.row(i).maxCoeff(&truth);
    hits += pred == truth;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

TrainResult train(const ModelSpec& spec, const PropagationOperator& op, const Matrix& x0,
                  const Matrix& y, const TrainConfig& cfg) {
  cfg.validate(op.size());
  TrainResult res{spec, {}};
  ModelSpec& model = res.model;
  std::vector<Index> train_rows = cfg.train_nodes;
  if (train_rows.empty()) {
    train_rows.resize(static_cast<std::size_t>(op.size()));
    for (Index i = 0; i < op.size(); ++i) train_rows[static_cast<std::size_t>(i)] = i;
  }
  const bool separate_eval = model.has_mode_dependent_layers();
  res.logs.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto fwd = forward(model, op, x0, Mode::train, derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    GradReport grads = backward(fwd.tape, y, cfg.loss, train_rows);
    if (!std::isfinite(grads.loss)) {
      throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch), epoch);
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = grads.loss;
    log.layer_norms = grads.layer_norms;
    for (double n : log.layer_norms) log.gradient_flow += n;

    const Matrix out = separate_eval ? forward(model, op, x0, Mode::eval).output : fwd.output;
    log.acc_train = accuracy(out, y, train_rows);
    log.acc_val = accuracy(out, y, cfg.val_nodes);
    log.acc_test = accuracy(out, y, cfg.test_nodes);
    res.logs.push_back(std::move(log));

    update_running_stats(model, fwd.tape);
    auto params = parameters(model);
    for (std::size_t s = 0; s < params.size(); ++s) {
      auto w = params[s].view();
      const Matrix& g = grads.gradients[s];
      if (cfg.weight_decay != 0.0 && params[s].role == ParamRole::weight) {
        w -= cfg.learning_rate * (g + cfg.weight_decay * Matrix(w));
      } else {
        w -= cfg.learning_rate * g;
      }
    }
  }
  return res;
}

PeakFlow peak_gradient_flow(std::span<const EpochLog> logs) {
  if (logs.empty()) throw ContractError("peak gradient flow of an empty log");
  PeakFlow p{logs.front().gradient_flow, logs.front().epoch};
  for (const auto& l : logs) {
    // NaN never wins a comparison, so a divergent epoch is compared as +inf.
    const double gf = std::isnan(l.gradient_flow) ? INFINITY : l.gradient_flow;
    if (gf > p.value) p = {gf, l.epoch};
  }
  return p;
}

void write_epoch_csv(std::ostream& out, std::span<const EpochLog> logs) {
  const std::size_t layers = logs.empty() ? 0 : logs.front().layer_norms.size();
  out << "epoch,loss,gf,acc_train,acc_val,acc_test";
  for (std::size_t l = 1; l <= layers; ++l) out << ",g" << l;
  out << '\n';
  const auto old = out.precision(17);
  for (const auto& log : logs) {
    out << log.epoch << ',' << log.loss << ',' << log.gradient_flow << ',' << log.acc_train << ','
        << log.acc_val << ',' << log.acc_test;
    for (double n : log.layer_norms) out << ',' << n;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace gnnlab
