#include <doctest.h>

#include <cmath>

#include "gnnlab/error.hpp"
#include "gnnlab/model.hpp"

using namespace gnnlab;

namespace {

PropagationOperator op_of(const std::string& text, std::uint64_t seed = 0) {
  return normalized_operator(generate_synthetic(parse_synthetic(text, seed)).graph);
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

}  // namespace

TEST_CASE("node-wise GCN layer is act(P diag(w) X)") {
  auto op = op_of("ring:6");
  Vector w(6), w2(6);
  w << 1, -2, 0.5, 3, -1, 2;
  w2 = Vector::Ones(6);
  auto spec = make_nodewise_model(ModelKind::gcn, {w, w2});
  Matrix x = Matrix::Random(6, 1);
  Matrix p = op.dense();
  Matrix h1 = relu(p * w.asDiagonal() * x);
  Matrix h2 = p * w2.asDiagonal() * h1;
  CHECK((forward(spec, op, x, Mode::eval).output - h2).norm() < 1e-14);
}

TEST_CASE("dense layer variants against direct formulas") {
  auto op = op_of("complete:4");
  Matrix p = op.dense();
  Matrix x = Matrix::Random(4, 3), w = Matrix::Random(3, 3);

  ModelSpec res;
  res.layers.push_back(ResGcnLayer{{w, false}, Activation::relu});
  CHECK((forward(res, op, x, Mode::eval).output - (relu(p * x * w) + x)).norm() < 1e-14);

  ModelSpec om;
  om.layers.push_back(OmegaGcnLayer{{w, false}, 0.3, false, Activation::identity});
  Matrix expect = (0.3 * p + 0.7 * Matrix::Identity(4, 4)) * x * w;
  CHECK((forward(om, op, x, Mode::eval).output - expect).norm() < 1e-14);

  ModelSpec ii;
  ii.layers.push_back(GcnIILayer{{w, false}, 0.1, 0.4, Activation::identity, GcnIIPlacement::combined});
  Matrix h = 0.9 * p * x + 0.1 * x;
  CHECK((forward(ii, op, x, Mode::eval).output - h * (0.6 * Matrix::Identity(3, 3) + 0.4 * w)).norm() < 1e-14);
}

TEST_CASE("omega = 1 reproduces GCN") {
  auto op = op_of("path:5");
  Matrix x = Matrix::Random(5, 2), w = Matrix::Random(2, 2);
  ModelSpec a, b;
  a.layers.push_back(GcnLayer{{w, false}, Activation::relu});
  b.layers.push_back(OmegaGcnLayer{{w, false}, 1.0, false, Activation::relu});
  CHECK((forward(a, op, x, Mode::eval).output - forward(b, op, x, Mode::eval).output).norm() < 1e-15);
}

TEST_CASE("gcnii beta schedule") {
  CHECK(gcnii_beta(1) == doctest::Approx(std::log(1.5)));
  CHECK(gcnii_beta(4) == doctest::Approx(std::log(1.125)));
  CHECK_THROWS(gcnii_beta(0));
}

TEST_CASE("batch norm normalizes columns in train mode") {
  auto op = op_of("ring:9");
  ModelSpec spec;
  BatchNormLayer bn;
  bn.gamma = RowVector::Ones(2);
  bn.shift = RowVector::Zero(2);
  bn.running_mean = RowVector::Zero(2);
  bn.running_var = RowVector::Ones(2);
  spec.layers.push_back(bn);
  Matrix x = Matrix::Random(9, 2) * 5.0;
  Matrix out = forward(spec, op, x, Mode::train).output;
  for (Index c = 0; c < 2; ++c) {
    CHECK(out.col(c).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.col(c).squaredNorm() / 9.0 == doctest::Approx(1.0).epsilon(1e-4));
  }
  // eval mode with unit running stats is (x - 0) / sqrt(1 + eps)
  Matrix ev = forward(spec, op, x, Mode::eval).output;
  CHECK((ev - x / std::sqrt(1.0 + 1e-5)).norm() < 1e-12);

  auto f = forward(spec, op, x, Mode::train);
  update_running_stats(spec, f.tape);
  const auto& st = std::get<BatchNormLayer>(spec.layers[0]);
  CHECK(st.running_mean(0) == doctest::Approx(0.1 * x.col(0).mean()));
}

TEST_CASE("dropedge layers: seeded in train mode, full operator in eval") {
  auto op = op_of("complete:8");
  ModelSpec spec;
  spec.layers.push_back(DropEdgeLayer{0.5, Activation::identity});
  Matrix x = Matrix::Random(8, 2);
  auto a = forward(spec, op, x, Mode::train, 4).output;
  auto b = forward(spec, op, x, Mode::train, 4).output;
  auto c = forward(spec, op, x, Mode::train, 5).output;
  CHECK(a == b);
  CHECK((a - c).norm() > 0.0);
  CHECK((forward(spec, op, x, Mode::eval).output - op.dense() * x).norm() < 1e-14);
  CHECK(spec.has_stochastic_layers());
}

TEST_CASE("dropout is inverted and seeded") {
  auto op = op_of("ring:5");
  ModelSpec spec;
  spec.layers.push_back(DropoutLayer{0.5});
  Matrix x = Matrix::Ones(5, 40);
  Matrix out = forward(spec, op, x, Mode::train, 1).output;
  for (Index i = 0; i < out.size(); ++i) CHECK((out.data()[i] == 0.0 || out.data()[i] == 2.0));
  CHECK(forward(spec, op, x, Mode::eval).output == x);
}

TEST_CASE("deep model shapes and validation") {
  auto op = op_of("ring:12");
  DeepModelOptions o;
  o.input_width = 5;
  o.hidden_width = 7;
  o.output_width = 3;
  o.depth = 4;
  for (auto kind : {ModelKind::gcn, ModelKind::gcnii, ModelKind::resgcn, ModelKind::omega_gcn,
                    ModelKind::gcn_batchnorm, ModelKind::gcn_dropedge}) {
    auto spec = make_model(kind, o);
    CHECK(spec.validate(12, 5) == 3);
    const auto wl = spec.weighted_layers();
    CHECK(wl.size() == (kind == ModelKind::gcnii ? 6u : 4u));
    CHECK(forward(spec, op, Matrix::Random(12, 5), Mode::train, 1).output.cols() == 3);
    CHECK_THROWS_AS(forward(spec, op, Matrix::Random(12, 4), Mode::eval), ShapeError);
    CHECK(parse_model_kind(to_string(kind)) == kind);
  }
  auto res = make_model(ModelKind::resgcn, o);
  CHECK(std::holds_alternative<GcnLayer>(res.layers.front()));
  CHECK(std::holds_alternative<ResGcnLayer>(res.layers[1]));
  CHECK_THROWS(parse_model_kind("transformer"));
}

TEST_CASE("glorot initialization is seeded and bounded") {
  DeepModelOptions o;
  o.input_width = 10;
  o.hidden_width = 6;
  o.depth = 2;
  o.seed = 3;
  auto a = make_model(ModelKind::gcn, o), b = make_model(ModelKind::gcn, o);
  const Matrix& w = layer_weight(a.layers[0])->values;
  CHECK(w == layer_weight(b.layers[0])->values);
  CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 16.0));
}

TEST_CASE("decoupled K = 0, L = 0 is a linear probe") {
  auto op = op_of("ring:6");
  DecoupledOptions d;
  d.input_width = 3;
  d.output_width = 2;
  auto spec = build_decoupled_spec(0, 0, Trick::none, d);
  REQUIRE(spec.layers.size() == 1);
  Matrix x = Matrix::Random(6, 3);
  CHECK((forward(spec, op, x, Mode::eval).output - x * layer_weight(spec.layers[0])->values).norm() < 1e-15);
}

TEST_CASE("decoupled specs place tricks on the requested side") {
  DecoupledOptions d;
  d.input_width = 4;
  auto sgc = build_decoupled_spec(3, 2, Trick::none, d);
  CHECK(std::get<SgcPropagation>(sgc.layers[0]).order == 3);
  CHECK(sgc.training_start == 1);
  CHECK(sgc.weighted_layers().size() == 3);

  auto de = build_decoupled_spec(3, 2, Trick::dropedge_prop, d);
  CHECK(de.training_start == 3);
  auto bnp = build_decoupled_spec(2, 1, Trick::bn_prop, d);
  CHECK_FALSE(bnp.advisories.empty());
  auto gt = build_decoupled_spec(2, 3, Trick::gcnii_train, d);
  CHECK(gt.initial_feature_layer == gt.training_start);
  CHECK(std::holds_alternative<GcnIILayer>(gt.layers[static_cast<std::size_t>(gt.training_start) + 1]));
  auto dt = build_decoupled_spec(2, 2, Trick::dropout_train, d);
  CHECK(dt.has_stochastic_layers());
  CHECK(parse_trick("bn_train") == Trick::bn_train);
  CHECK_THROWS(build_decoupled_spec(-1, 0, Trick::none, d));
}

TEST_CASE("spec validation rejects bad parameters") {
  ModelSpec spec;
  spec.layers.push_back(DropEdgeLayer{1.5, Activation::identity});
  CHECK_THROWS_AS(spec.validate(4, 2), ContractError);
  ModelSpec shape;
  shape.layers.push_back(GcnLayer{{Matrix::Ones(3, 2), false}, Activation::relu});
  CHECK_THROWS_AS(shape.validate(4, 2), ShapeError);
}
