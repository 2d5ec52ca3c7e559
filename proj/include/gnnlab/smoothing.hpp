#pragma once

#include <string>
#include <vector>

#include "gnnlab/graph.hpp"
#include "gnnlab/spectral.hpp"

namespace gnnlab {

// E(X) = (1/v) sum_i sum_{j in N_i} ||X_i - X_j||^2 over the loop-free neighborhood.
double dirichlet_energy(const Graph& g, const Matrix& x);

// E(P^k X) for k = 0..max_steps.
std::vector<double> energy_trajectory(const Graph& g, const PropagationOperator& op,
                                      const Matrix& x, int max_steps);

enum class DecayStatus {
  strict,         // E(PX) < (1 - gap)^2 E(X)
  equality,       // equal within tolerance
  eigen_aligned,  // every column of X is an eigenvector of P; reported apart
  degenerate,     // E(X) = 0, nothing to compare
  violated,
};

std::string to_string(DecayStatus s);

struct EnergyDecay {
  double energy = 0.0;
  double propagated_energy = 0.0;
  double bound = 0.0;
  DecayStatus status = DecayStatus::degenerate;
  // E(PX) <= bound within tolerance.
  bool holds = false;
};

EnergyDecay energy_decay_check(const Graph& g, const PropagationOperator& op,
                               const SpectralSummary& summary, const Matrix& x);
EnergyDecay energy_decay_check(const Graph& g, const Matrix& x);

struct MixingReport {
  double epsilon = 0.0;
  Index t_mix = 0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double pi_min = 0.0;
  double lambda_gap = 0.0;
  // d(t) for t = 0..t_mix.
  std::vector<double> distance;
  bool monotone = true;
  // lower_bound <= t_mix <= upper_bound.
  bool contained = false;
};

// Relaxation-time bounds with lazy-walk eigenvalue lambda_2 = 1 - gap/2.
double mixing_lower_bound(double spectral_gap, double epsilon);
double mixing_upper_bound(double spectral_gap, double epsilon, double pi_min);

// Brute-force evolution of the lazy walk (I + D̂^{-1}Â)/2 from every start node.
// step_cap = 0 selects 10 * ceil(upper_bound). Throws ContractError on a
// disconnected graph or epsilon outside (0, 1/2); ConvergenceError when the
// cap is reached first.
MixingReport mixing_time_empirical(const Graph& g, double epsilon,
                                   const SpectralSummary* summary = nullptr, Index step_cap = 0);

}  // namespace gnnlab
