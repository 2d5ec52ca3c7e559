#pragma once

#include <vector>

#include "gnnlab/graph.hpp"
#include "gnnlab/types.hpp"

namespace gnnlab {

inline constexpr Index kDenseEigenCap = 512;
inline constexpr double kZeroEigenTol = 1e-9;

struct SpectralSummary {
  // Eigenvalues a_1 <= ... <= a_v of L_sym = I - P_sym with matching
  // eigenvector columns. Empty when only the iterative path ran.
  Vector eigenvalues;
  Matrix eigenvectors;
  // a_2 for connected graphs, 0 otherwise.
  double spectral_gap = 0.0;
  // a_v (estimated by power iteration above the dense cap).
  double largest_eigenvalue = 0.0;
  // Unit eigenvector of P_sym for eigenvalue 1; max-magnitude entry positive.
  Vector dominant_eigenvector;
  bool connected = false;
  // a_v = 2 within tolerance.
  bool is_bipartite = false;
  bool dense = false;
  // Residual ||M x - theta x|| of the iterative gap estimate (0 for dense).
  double residual = 0.0;
};

// Dense symmetric eigendecomposition for v <= dense_cap, otherwise a shifted
// power iteration for the gap. Throws ConvergenceError when the iteration stalls.
SpectralSummary spectral_summary(const PropagationOperator& op, Index dense_cap = kDenseEigenCap);

// ||P^k X0 - u u^T X0||_F computed by k successive propagations.
// Throws ContractError for disconnected or bipartite inputs.
double convergence_residual(const PropagationOperator& op, const SpectralSummary& summary,
                            const Matrix& x0, int k);
double convergence_residual(const PropagationOperator& op, const Matrix& x0, int k);

// Residuals for k = 0..max_steps, sharing one propagation sweep.
std::vector<double> convergence_trajectory(const PropagationOperator& op,
                                           const SpectralSummary& summary, const Matrix& x0,
                                           int max_steps);

}  // namespace gnnlab
