#include <doctest.h>

#include <cmath>

#include "gnnlab/bounds.hpp"
#include "gnnlab/error.hpp"

using namespace gnnlab;

namespace {

BoundInputs k3_inputs(int depth) {
  BoundInputs in;
  in.gamma = 2.0;
  in.num_nodes = 3;
  in.delta = 1.0 / 3.0;
  in.weight_norms.assign(static_cast<std::size_t>(depth), 1.0);
  in.feature_norms.assign(static_cast<std::size_t>(depth), 1.0);
  in.x0_norm = 1.0;
  return in;
}

BoundInputs with_all_extras(BoundInputs in) {
  const auto n = in.weight_norms.size();
  in.alpha = 0.1;
  in.beta.assign(n, 0.5);
  in.bn_scale.assign(n, 1.0);
  in.dropedge_delta.assign(n, in.delta);
  in.omega = 0.5;
  return in;
}

}  // namespace

TEST_CASE("gcn row on K_3 with one layer is 2/9") {
  auto t = gcn_bound(k3_inputs(1), 1);
  CHECK(t.value == doctest::Approx(2.0 / 9.0));
  CHECK(t.prefactor == doctest::Approx(2.0 / 3.0));
  CHECK(t.smoothing == doctest::Approx(1.0 / 3.0));
  CHECK(t.training == 1.0);
  CHECK(t.feature == 1.0);
}

TEST_CASE("gcnii row worked example is 0.11") {
  auto in = k3_inputs(2);
  in.alpha = 0.1;
  in.beta = {0.5, 0.5};
  auto t = gcnii_bound(in, 1);
  CHECK(t.value == doctest::Approx(0.11));
  CHECK(t.smoothing == doctest::Approx(0.3));
  CHECK(t.training == doctest::Approx(1.0));
  CHECK(t.feature == doctest::Approx(0.55));
}

TEST_CASE("degenerate parameter settings") {
  auto in = with_all_extras(k3_inputs(4));
  in.weight_norms = {1.3, 2.0, 0.7, 1.1};
  for (int l = 1; l <= 4; ++l) {
    auto w1 = in;
    w1.omega = 1.0;
    CHECK(omegagcn_bound(w1, l).value == doctest::Approx(gcn_bound(in, l).value).epsilon(1e-15));
    auto w0 = in;
    w0.omega = 0.0;
    CHECK(omegagcn_bound(w0, l).smoothing == 1.0);

    auto ii = in;
    ii.alpha = 0.0;
    ii.beta.assign(4, 1.0);
    // one power of Δ fewer than the gcn row
    CHECK(gcnii_bound(ii, l).value == doctest::Approx(gcn_bound(in, l).value / in.delta));
    ii.beta.assign(4, 0.0);
    CHECK(gcnii_bound(ii, l).value == 0.0);

    CHECK(bn_bound(in, l).value == doctest::Approx(gcn_bound(in, l).value));
    CHECK(dropedge_bound(in, l).value == doctest::Approx(gcn_bound(in, l).value));
  }
}

TEST_CASE("annihilation and the residual floor") {
  auto in = k3_inputs(3);
  in.weight_norms = {1.0, 0.0, 1.0};
  CHECK(gcn_bound(in, 1).value == 0.0);
  CHECK(gcn_bound(in, 2).value > 0.0);
  in.weight_norms = {0.0, 0.0, 0.0};
  CHECK(resgcn_bound(in, 1).value == doctest::Approx(in.delta * 1.0 * 2.0 / 3.0));
}

TEST_CASE("deep limit decays geometrically") {
  double prev = INFINITY;
  for (int n : {2, 8, 32, 128}) {
    auto in = k3_inputs(n);
    in.weight_norms.assign(static_cast<std::size_t>(n), 2.0);
    const double b = gcn_bound(in, 1).value;
    CHECK(b < prev);
    prev = b;
  }
  CHECK(prev < 1e-20);
}

TEST_CASE("bounds are monotone in their inputs") {
  auto base = with_all_extras(k3_inputs(5));
  base.weight_norms = {1.2, 0.8, 1.5, 2.0, 1.1};
  for (auto row : {BoundRow::gcn, BoundRow::gcnii, BoundRow::batchnorm, BoundRow::dropedge, BoundRow::resgcn,
                   BoundRow::omega_gcn}) {
    for (int l = 1; l <= 5; ++l) {
      const double b0 = evaluate_bound(row, base, l).value;
      for (std::size_t n = 0; n < 5; ++n) {
        auto up = base;
        up.weight_norms[n] *= 1.5;
        CHECK(evaluate_bound(row, up, l).value >= b0);
      }
      auto g = base;
      g.gamma *= 2.0;
      CHECK(evaluate_bound(row, g, l).value >= b0);
      auto f = base;
      for (auto& x : f.feature_norms) x *= 2.0;
      f.x0_norm *= 2.0;
      CHECK(evaluate_bound(row, f, l).value >= b0);
    }
  }
}

TEST_CASE("missing extras and bad inputs are rejected") {
  auto in = k3_inputs(2);
  CHECK_THROWS_AS(gcnii_bound(in, 1), ContractError);
  CHECK_THROWS_AS(bn_bound(in, 1), ContractError);
  CHECK_THROWS_AS(dropedge_bound(in, 1), ContractError);
  CHECK_THROWS_AS(omegagcn_bound(in, 1), ContractError);
  CHECK_THROWS_AS(gcn_bound(in, 3), ContractError);
  in.gamma = -1.0;
  CHECK_THROWS_AS(gcn_bound(in, 1), ContractError);
}

TEST_CASE("verify_bounds refuses vector features") {
  auto g = generate_synthetic(parse_synthetic("ring:5", 0)).graph;
  auto op = normalized_operator(g);
  auto spec = make_nodewise_model(ModelKind::gcn, {Vector::Ones(5)});
  CHECK_THROWS_AS(verify_bounds(ModelKind::gcn, spec, op, Matrix::Ones(5, 2), Matrix::Ones(5, 2)),
                  ContractError);
}

TEST_CASE("zero features give zero gradients") {
  auto g = generate_synthetic(parse_synthetic("ring:6", 0)).graph;
  auto op = normalized_operator(g);
  std::vector<Vector> w(3, Vector::Constant(6, 0.8));
  for (auto kind : {ModelKind::gcn, ModelKind::resgcn, ModelKind::omega_gcn, ModelKind::gcn_dropedge}) {
    auto rep = verify_bounds(kind, make_nodewise_model(kind, w), op, Matrix::Zero(6, 1), Matrix::Ones(6, 1), 1);
    for (const auto& l : rep.layers) CHECK(l.empirical == 0.0);
    CHECK(rep.sound());
  }
}

TEST_CASE("K_3 with unit inputs: the measured gradient is three times the gcn row") {
  // X0 = 1, W = 1, Y = -1: X^{(1)} = 1, dL/dW_k = sum_i (2/3)(1/3) = 2/3
  auto g = generate_synthetic(parse_synthetic("complete:3", 0)).graph;
  auto op = normalized_operator(g);
  auto spec = make_nodewise_model(ModelKind::gcn, {Vector::Ones(3)});
  auto rep = verify_bounds(ModelKind::gcn, spec, op, Matrix::Ones(3, 1), Matrix::Constant(3, 1, -1.0));
  REQUIRE(rep.layers.size() == 1);
  CHECK(rep.layers[0].empirical == doctest::Approx(2.0 / 3.0));
  CHECK(rep.layers[0].terms.value == doctest::Approx(2.0 / 9.0));
  CHECK(rep.min_margin == doctest::Approx(-4.0 / 9.0));
  CHECK_FALSE(rep.sound());
}

TEST_CASE("verify_bounds collects model extras") {
  auto g = generate_synthetic(parse_synthetic("sbm:6,6:0.5:0.1", 2)).graph;
  auto op = normalized_operator(g);
  std::vector<Vector> w(3, Vector::Constant(12, 1.1));
  Matrix x = Matrix::Random(12, 1), y = Matrix::Random(12, 1);

  auto bn = verify_bounds(ModelKind::gcn_batchnorm, make_nodewise_model(ModelKind::gcn_batchnorm, w), op, x, y);
  CHECK(bn.inputs.bn_scale.size() == 3);
  auto de = verify_bounds(ModelKind::gcn_dropedge, make_nodewise_model(ModelKind::gcn_dropedge, w), op, x, y, 4);
  CHECK(de.inputs.dropedge_delta.size() == 3);
  auto ii = verify_bounds(ModelKind::gcnii, make_nodewise_model(ModelKind::gcnii, w), op, x, y);
  CHECK(ii.inputs.beta.size() == 3);
  CHECK(ii.inputs.beta[1] == doctest::Approx(gcnii_beta(2)));
  CHECK(ii.inputs.alpha.value() == doctest::Approx(0.1));
  CHECK(ii.inputs.delta == op.delta);
}

TEST_CASE("sweep instances are matched across models and reproducible") {
  auto a = random_bound_instance(ModelKind::gcn, {}, 17);
  auto b = random_bound_instance(ModelKind::resgcn, {}, 17);
  CHECK(a.graph->edges() == b.graph->edges());
  CHECK(a.x0 == b.x0);
  CHECK(a.graph->is_connected());
  CHECK(a.graph->num_nodes() <= 30);
  CHECK(a.weights.size() <= 16);
  auto s1 = bound_sweep(ModelKind::omega_gcn, 8, 3, {}, 1);
  auto s2 = bound_sweep(ModelKind::omega_gcn, 8, 3, {}, 2);
  CHECK(s1.min_margin == s2.min_margin);
}

TEST_CASE("residual row dominates the gcn row on summed layers") {
  auto o = bound_ordering(30, 5);
  CHECK(o.res_gt_gcn == 30);
  for (const auto& s : o.details) {
    CHECK(s.layers >= 2);
    // for omega in (0,1), omega Δ + 1 - omega >= Δ
    CHECK(s.omega_gcn >= s.gcn);
  }
}
