#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "gnnlab/model.hpp"

namespace gnnlab {

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 200;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
  std::vector<Index> train_nodes;  // empty: every node
  std::vector<Index> val_nodes;
  std::vector<Index> test_nodes;
  LossKind loss = LossKind::half_mse;

  // Throws ContractError on lr <= 0 (lr == 0 is allowed for frozen runs),
  // overlapping masks or out-of-range indices.
  void validate(Index num_nodes) const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  // Sum of the per-layer norms below.
  double gradient_flow = 0.0;
  std::vector<double> layer_norms;
  double acc_train = 0.0;
  double acc_val = 0.0;
  double acc_test = 0.0;
};

struct TrainResult {
  ModelSpec model;
  std::vector<EpochLog> logs;
};

// Argmax-vs-argmax accuracy over the given rows (0 when empty).
double accuracy(const Matrix& output, const Matrix& target, std::span<const Index> rows);

// Full-batch gradient descent W <- W - lr * dL/dW. Each epoch runs a
// train-mode forward with seed derive_seed(cfg.seed, epoch). Throws
// TrainingDiverged with the epoch index on a non-finite loss.
TrainResult train(const ModelSpec& spec, const PropagationOperator& op, const Matrix& x0,
                  const Matrix& y, const TrainConfig& cfg);

struct PeakFlow {
  double value = 0.0;
  int epoch = 0;
};

PeakFlow peak_gradient_flow(std::span<const EpochLog> logs);

// CSV with header epoch,loss,gf,acc_train,acc_val,acc_test,g1..gN.
void write_epoch_csv(std::ostream& out, std::span<const EpochLog> logs);

}  // namespace gnnlab
