#include "gnnlab/gradcheck.hpp"

#include <cmath>
#include <limits>

#include "gnnlab/error.hpp"

namespace gnnlab {

std::vector<bool> relu_pattern(const Tape& tape) {
  std::vector<bool> out;
  for (const auto& r : tape.records()) {
    if (const auto* relu = std::get_if<prim::Relu>(&r.op)) {
      const Matrix& x = tape.value(relu->in);
      for (Index i = 0; i < x.size(); ++i) out.push_back(x.data()[i] > 0.0);
    }
  }
  return out;
}

FiniteDifferenceReport finite_difference_check(const ModelSpec& spec, const PropagationOperator& op,
                                               const Matrix& x0, const Matrix& y, double h,
                                               std::uint64_t seed) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ContractError("finite-difference step must lie in [1e-7, 1e-3]");
  auto base = forward(spec, op, x0, Mode::train, seed);
  const GradReport grads = backward(base.tape, y, spec.loss);
  const auto pattern = relu_pattern(base.tape);

  ModelSpec work = spec;
  auto params = parameters(work);
  FiniteDifferenceReport rep;
  auto eval = [&](std::vector<bool>* pat) {
    auto f = forward(work, op, x0, Mode::train, seed);
    if (pat) *pat = relu_pattern(f.tape);
    return loss_value(f.output, y, work.loss);
  };
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto view = params[s].view();
    for (Index idx = 0; idx < view.size(); ++idx) {
      double& w = view.data()[idx];
      const double w0 = w;
      std::vector<bool> up, down;
      w = w0 + 10.0 * h;
      eval(&up);
      w = w0 - 10.0 * h;
      eval(&down);
      if (up != pattern || down != pattern) {
        w = w0;
        ++rep.skipped_kinks;
        continue;
      }
      w = w0 + h;
      const double lp = eval(nullptr);
      w = w0 - h;
      const double lm = eval(nullptr);
      w = w0;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = grads.gradients[s].data()[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      const double rel = std::abs(analytic - numeric) / denom;
      // gradients below this cannot be resolved to 1e-5 relative: 1e5 ulps of L over h
      const double noise = 1e5 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lp), std::abs(lm)) / h;
      rep.max_resolved_error = std::max(
          rep.max_resolved_error, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), noise, 1e-300}));
      if (std::max(std::abs(analytic), std::abs(numeric)) < noise) ++rep.below_noise;
      ++rep.checked;
      if (rel > rep.max_relative_error || rep.worst_slot < 0) {
        rep.max_relative_error = std::max(rep.max_relative_error, rel);
        rep.worst_slot = static_cast<int>(s);
        rep.worst_index = idx;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

NodewiseJacobians nodewise_jacobians(const ModelSpec& spec, const PropagationOperator& op,
                                     const Matrix& x0) {
  if (x0.cols() != 1) throw ShapeError("node-wise Jacobians need scalar features (m = 1)");
  if (!op.graph) throw ContractError("operator carries no graph");
  const Graph& g = *op.graph;
  const Index v = g.num_nodes();
  if (x0.rows() != v) throw ShapeError("X0 rows != v");
  // Degrees come from the graph, not from the operator under test.
  const std::vector<double> d = g.self_looped_degrees();
  auto coupling = [&](Index i, Index j) {
    return 1.0 / std::sqrt(d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)]);
  };

  NodewiseJacobians jac;
  jac.activations.push_back(x0.col(0));
  for (const auto& layer : spec.layers) {
    const auto* gcn = std::get_if<GcnLayer>(&layer);
    if (!gcn || !gcn->weight.nodewise) throw ContractError("node-wise Jacobians need node-wise GCN layers only");
    const Vector w = gcn->weight.values.col(0);
    if (w.size() != v) throw ShapeError("node-wise weight must be v x 1");
    const Vector& x = jac.activations.back();

    // X_i' = s(W_i X_i / d̂_i + sum_{j in N_i} W_j X_j / sqrt(d̂_i d̂_j))
    Vector pre(v), slope(v), next(v);
    for (Index i = 0; i < v; ++i) {
      double acc = coupling(i, i) * w(i) * x(i);
      for (Index j : g.neighbors(i)) acc += coupling(i, j) * w(j) * x(j);
      pre(i) = acc;
    }
    for (Index i = 0; i < v; ++i) {
      const bool relu = gcn->activation == Activation::relu;
      slope(i) = relu ? (pre(i) > 0.0 ? 1.0 : 0.0) : 1.0;
      next(i) = relu ? std::max(pre(i), 0.0) : pre(i);
    }

    Matrix phi = Matrix::Zero(v, v);
    Matrix psi = Matrix::Zero(v, v);
    for (Index i = 0; i < v; ++i) {
      phi(i, i) = slope(i) * w(i) * coupling(i, i);
      psi(i, i) = slope(i) * x(i) * coupling(i, i);
      for (Index j : g.neighbors(i)) {
        phi(i, j) = slope(i) * w(j) * coupling(i, j);
        psi(i, j) = slope(i) * x(j) * coupling(i, j);
      }
    }
    jac.phi.push_back(std::move(phi));
    jac.psi.push_back(std::move(psi));
    jac.slope.push_back(std::move(slope));
    jac.activations.push_back(std::move(next));
  }
  return jac;
}

std::vector<Vector> chain_rule_gradients(const NodewiseJacobians& jac, const Vector& target) {
  const auto n = jac.phi.size();
  const Vector& out = jac.activations.back();
  if (target.size() != out.size()) throw ShapeError("target length != v");
  const double v = static_cast<double>(out.size());
  std::vector<Vector> grads(n);
  // Row vector dL/dX^{(N)} * Phi^{(N)} ... Phi^{(l+1)}, built from the top down.
  RowVector upstream = ((out - target) / v).transpose();
  for (std::size_t l = n; l-- > 0;) {
    grads[l] = (upstream * jac.psi[l]).transpose();
    upstream = upstream * jac.phi[l];
  }
  return grads;
}

}  // namespace gnnlab
