#include "gnnlab/smoothing.hpp"

#include <algorithm>
#include <cmath>

#include "gnnlab/error.hpp"

namespace gnnlab {

double dirichlet_energy(const Graph& g, const Matrix& x) {
  if (x.rows() != g.num_nodes()) throw ShapeError("dirichlet_energy: feature rows != v");
  double sum = 0.0;
  for (auto [i, j] : g.edges()) sum += (x.row(i) - x.row(j)).squaredNorm();
  // Each undirected edge appears twice in the double sum.
  return 2.0 * sum / static_cast<double>(g.num_nodes());
}

std::vector<double> energy_trajectory(const Graph& g, const PropagationOperator& op,
                                      const Matrix& x, int max_steps) {
  std::vector<double> out;
  Matrix cur = x;
  out.push_back(dirichlet_energy(g, cur));
  for (int k = 1; k <= max_steps; ++k) {
    cur = propagate(op, cur);
    out.push_back(dirichlet_energy(g, cur));
  }
  return out;
}

std::string to_string(DecayStatus s) {
  switch (s) {
    case DecayStatus::strict: return "strict";
    case DecayStatus::equality: return "equality";
    case DecayStatus::eigen_aligned: return "eigen_aligned";
    case DecayStatus::degenerate: return "degenerate";
    case DecayStatus::violated: return "violated";
  }
  return "unknown";
}

namespace {

bool eigen_aligned(const Matrix& x, const Matrix& px) {
  for (Index c = 0; c < x.cols(); ++c) {
    const double nx = x.col(c).squaredNorm();
    if (nx == 0.0) continue;
    const double mu = x.col(c).dot(px.col(c)) / nx;
    if ((px.col(c) - mu * x.col(c)).norm() > 1e-10 * std::sqrt(nx)) return false;
  }
  return true;
}

}  // namespace

EnergyDecay energy_decay_check(const Graph& g, const PropagationOperator& op,
                               const SpectralSummary& summary, const Matrix& x) {
  if (!summary.connected) throw ContractError("energy decay check needs a connected graph");
  EnergyDecay r;
  const Matrix px = propagate(op, x);
  r.energy = dirichlet_energy(g, x);
  r.propagated_energy = dirichlet_energy(g, px);
  const double shrink = 1.0 - summary.spectral_gap;
  r.bound = shrink * shrink * r.energy;
  const double tol = 1e-12 * std::max(r.energy, 1.0);
  r.holds = r.propagated_energy <= r.bound + tol;
  if (r.energy <= 1e-14) {
    r.status = DecayStatus::degenerate;
  } else if (eigen_aligned(x, px)) {
    r.status = DecayStatus::eigen_aligned;
  } else if (std::abs(r.propagated_energy - r.bound) <= tol) {
    r.status = DecayStatus::equality;
  } else {
    r.status = r.propagated_energy < r.bound ? DecayStatus::strict : DecayStatus::violated;
  }
  return r;
}

EnergyDecay energy_decay_check(const Graph& g, const Matrix& x) {
  auto op = normalized_operator(g);
  return energy_decay_check(g, op, spectral_summary(op), x);
}

double mixing_lower_bound(double spectral_gap, double epsilon) {
  return (2.0 - spectral_gap) / spectral_gap * std::log(1.0 / (2.0 * epsilon));
}

double mixing_upper_bound(double spectral_gap, double epsilon, double pi_min) {
  return 2.0 / spectral_gap * std::log(1.0 / (epsilon * pi_min));
}

MixingReport mixing_time_empirical(const Graph& g, double epsilon, const SpectralSummary* summary,
                                   Index step_cap) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ContractError("epsilon must lie in (0, 1/2)");
  if (!g.is_connected()) throw ContractError("mixing time needs a connected graph (pi not unique)");
  const Index v = g.num_nodes();
  MixingReport r;
  r.epsilon = epsilon;

  RowVector pi(v);
  double total = 0.0;
  for (Index i = 0; i < v; ++i) total += g.self_looped_degree(i);
  for (Index i = 0; i < v; ++i) pi(i) = g.self_looped_degree(i) / total;
  r.pi_min = pi.minCoeff();

  if (v == 1) {
    // Already stationary; no nonzero eigenvalue exists to form the bounds.
    r.distance = {0.0};
    r.contained = true;
    return r;
  }

  SpectralSummary local;
  if (!summary) {
    local = spectral_summary(normalized_operator(g));
    summary = &local;
  }
  r.lambda_gap = summary->spectral_gap;
  r.lower_bound = mixing_lower_bound(r.lambda_gap, epsilon);
  r.upper_bound = mixing_upper_bound(r.lambda_gap, epsilon, r.pi_min);
  const Index cap = step_cap > 0 ? step_cap : 10 * static_cast<Index>(std::ceil(r.upper_bound));

  SparseMatrix walk = random_walk_matrix(g);
  SparseMatrix identity(v, v);
  identity.setIdentity();
  SparseMatrix lazy = 0.5 * (identity + walk);

  // Row s holds the distribution after t steps from start node s.
  Matrix dist = Matrix::Identity(v, v);
  auto worst_tv = [&] {
    double worst = 0.0;
    for (Index s = 0; s < v; ++s) worst = std::max(worst, 0.5 * (dist.row(s) - pi).lpNorm<1>());
    return worst;
  };
  double d = worst_tv();
  r.distance.push_back(d);
  Index t = 0;
  while (d > epsilon) {
    if (t >= cap) throw ConvergenceError("mixing step cap exceeded", d);
    dist = dist * lazy;
    ++t;
    const double next = worst_tv();
    if (next > d + 1e-14) r.monotone = false;
    d = next;
    r.distance.push_back(d);
  }
  r.t_mix = t;
  r.contained = r.lower_bound <= static_cast<double>(t) &&
                static_cast<double>(t) <= r.upper_bound + 1e-9;
  return r;
}

}  // namespace gnnlab
