#include "gnnlab/spectral.hpp"

#include <cmath>

#include "gnnlab/error.hpp"
#include "gnnlab/random.hpp"

namespace gnnlab {

namespace {

void fix_sign(Vector& u) {
  Index arg = 0;
  u.cwiseAbs().maxCoeff(&arg);
  if (u(arg) < 0) u = -u;
}

bool graph_connected(const PropagationOperator& op, const Vector* eigenvalues) {
  if (op.graph) return op.graph->is_connected();
  return eigenvalues && eigenvalues->size() > 1 ? (*eigenvalues)(1) > kZeroEigenTol : true;
}

struct PowerResult {
  double value;
  double residual;
  bool converged;
};

// Largest eigenvalue of a symmetric operator apply(x) restricted to the
// orthogonal complement of `deflate` (may be empty).
template <class Apply>
PowerResult power_iteration(Index n, Apply apply, const Vector& deflate, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x9e1);
  std::normal_distribution<double> normal;
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = normal(rng);
  auto project = [&](Vector& y) {
    if (deflate.size() == n) y -= deflate * deflate.dot(y);
  };
  project(x);
  x.normalize();
  constexpr int kMaxIterations = 200000;
  constexpr double kTol = 1e-9;
  double theta = 0.0;
  double residual = 0.0;
  for (int it = 0; it < kMaxIterations; ++it) {
    Vector y = apply(x);
    project(y);
    theta = x.dot(y);
    residual = (y - theta * x).norm();
    if (residual < kTol) return {theta, residual, true};
    const double ny = y.norm();
    if (ny == 0.0) return {0.0, 0.0, true};
    x = y / ny;
  }
  return {theta, residual, false};
}

}  // namespace

SpectralSummary spectral_summary(const PropagationOperator& op, Index dense_cap) {
  const Index v = op.size();
  SpectralSummary s;
  if (v <= dense_cap) {
    Matrix lap = Matrix::Identity(v, v) - op.dense();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(lap);
    if (solver.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", 0.0);
    s.dense = true;
    s.eigenvalues = solver.eigenvalues();
    s.eigenvectors = solver.eigenvectors();
    s.connected = graph_connected(op, &s.eigenvalues);
    s.spectral_gap = (s.connected && v > 1) ? s.eigenvalues(1) : 0.0;
    s.largest_eigenvalue = s.eigenvalues(v - 1);
    s.dominant_eigenvector = s.eigenvectors.col(0);
    fix_sign(s.dominant_eigenvector);
  } else {
    s.dense = false;
    s.connected = graph_connected(op, nullptr);
    Vector u(v);
    for (Index i = 0; i < v; ++i) u(i) = std::sqrt(op.degrees[static_cast<std::size_t>(i)]);
    u.normalize();
    s.dominant_eigenvector = u;
    // M = (I + P)/2 maps the spectrum of P into [0, 1] monotonically, so its top
    // eigenvalue on u-perp is (1 + mu_2)/2.
    auto lazy = [&](const Vector& x) -> Vector { return 0.5 * (x + op.matrix * x); };
    auto gap = power_iteration(v, lazy, u, 1);
    if (!gap.converged) throw ConvergenceError("power iteration for the spectral gap stalled", gap.residual);
    s.residual = gap.residual;
    s.spectral_gap = s.connected ? 1.0 - (2.0 * gap.value - 1.0) : 0.0;
    auto lap = [&](const Vector& x) -> Vector { return x - op.matrix * x; };
    auto top = power_iteration(v, lap, Vector(), 2);
    if (!top.converged) throw ConvergenceError("power iteration for a_v stalled", top.residual);
    s.largest_eigenvalue = top.value;
  }
  s.is_bipartite = std::abs(s.largest_eigenvalue - 2.0) < kZeroEigenTol;
  return s;
}

namespace {

void require_convergent(const SpectralSummary& s) {
  if (!s.connected) throw ContractError("convergence analysis needs a connected graph");
  if (s.is_bipartite) throw ContractError("convergence analysis needs a non-bipartite operator");
}

}  // namespace

std::vector<double> convergence_trajectory(const PropagationOperator& op,
                                           const SpectralSummary& summary, const Matrix& x0,
                                           int max_steps) {
  require_convergent(summary);
  if (x0.rows() != op.size()) throw ShapeError("convergence: X0 rows != v");
  if (max_steps < 0) throw ContractError("step count must be non-negative");
  const Vector& u = summary.dominant_eigenvector;
  const Matrix limit = u * (u.transpose() * x0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_steps) + 1);
  Matrix x = x0;
  out.push_back((x - limit).norm());
  for (int k = 1; k <= max_steps; ++k) {
    x = propagate(op, x);
    out.push_back((x - limit).norm());
  }
  return out;
}

double convergence_residual(const PropagationOperator& op, const SpectralSummary& summary,
                            const Matrix& x0, int k) {
  return convergence_trajectory(op, summary, x0, k).back();
}

double convergence_residual(const PropagationOperator& op, const Matrix& x0, int k) {
  return convergence_residual(op, spectral_summary(op), x0, k);
}

}  // namespace gnnlab
