#pragma once

#include <vector>

#include "gnnlab/model.hpp"

namespace gnnlab {

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  Index checked = 0;
  // Scalars whose +-10h neighborhood crosses a ReLU kink.
  Index skipped_kinks = 0;
  // Same error with the denominator floored at 1e5 * eps * |L| / h, the
  // smallest gradient a difference quotient resolves to 1e-5 relative, and
  // the count of entries below that floor.
  double max_resolved_error = 0.0;
  Index below_noise = 0;
  // Location of the worst entry.
  int worst_slot = -1;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central differences (L(w+h) - L(w-h)) / 2h for every scalar parameter vs.
// backward(). Stochastic layers are frozen by re-running train mode with the
// same seed. Relative error uses max(|analytic|, |numeric|, 1e-12).
FiniteDifferenceReport finite_difference_check(const ModelSpec& spec, const PropagationOperator& op,
                                               const Matrix& x0, const Matrix& y, double h,
                                               std::uint64_t seed);

// ReLU activity (input > 0) of every recorded ReLU, concatenated.
std::vector<bool> relu_pattern(const Tape& tape);

// Jacobian factors of a scalar-feature node-wise GCN, built from the degree
// formulas rather than the operator matrix:
//   Phi^{(n)}_{ij} = s'_i W_j^{(n)} / sqrt(d̂_i d̂_j)   (j = i or j in N_i)
//   Psi^{(l)}_{ik} = s'_i X_k^{(l-1)} / sqrt(d̂_i d̂_k)  (column k is dX^{(l)}/dW_k^{(l)})
// where s' is the realized activation derivative of that layer.
struct NodewiseJacobians {
  std::vector<Matrix> phi;          // phi[n-1] = Phi^{(n)}, n = 1..N
  std::vector<Matrix> psi;          // psi[l-1] = Psi^{(l)}
  std::vector<Vector> activations;  // X^{(0)} .. X^{(N)}
  std::vector<Vector> slope;        // s' per layer
};

// The model must consist of node-wise GcnLayers only and X0 must have one column.
NodewiseJacobians nodewise_jacobians(const ModelSpec& spec, const PropagationOperator& op,
                                     const Matrix& x0);

// dL/dW_k^{(l)} = dL/dX^{(N)} * Phi^{(N)} ... Phi^{(l+1)} * Psi^{(l)} for the half-MSE loss;
// entry [l-1](k).
std::vector<Vector> chain_rule_gradients(const NodewiseJacobians& jac, const Vector& target);

}  // namespace gnnlab
