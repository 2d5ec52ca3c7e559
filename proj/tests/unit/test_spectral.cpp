#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gnnlab/error.hpp"
#include "gnnlab/spectral.hpp"

using namespace gnnlab;

namespace {

PropagationOperator op_of(const std::string& text, std::uint64_t seed = 0) {
  return normalized_operator(generate_synthetic(parse_synthetic(text, seed)).graph);
}

// Â = C + I on a ring gives P = (I + C) / 3 with P-eigenvalues (1 + 2cos(2πk/n)) / 3.
double ring_gap(int n) { return (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / n)) / 3.0; }

}  // namespace

TEST_CASE("complete graph spectrum") {
  for (int n : {3, 6, 10}) {
    auto s = spectral_summary(op_of("complete:" + std::to_string(n)));
    CHECK(s.dense);
    CHECK(s.connected);
    CHECK(s.eigenvalues(0) == doctest::Approx(0.0).epsilon(1e-12));
    for (Index i = 1; i < n; ++i) CHECK(s.eigenvalues(i) == doctest::Approx(1.0));
    CHECK(s.spectral_gap == doctest::Approx(1.0));
    // u ∝ sqrt(d̂) is constant here.
    CHECK(s.dominant_eigenvector.minCoeff() == doctest::Approx(1.0 / std::sqrt(n)));
  }
}

TEST_CASE("ring spectral gap matches the circulant formula") {
  for (int n : {5, 12, 51}) {
    auto s = spectral_summary(op_of("ring:" + std::to_string(n)));
    CHECK(s.spectral_gap == doctest::Approx(ring_gap(n)).epsilon(1e-10));
    CHECK_FALSE(s.is_bipartite);
  }
}

TEST_CASE("iterative path agrees with the dense solve") {
  auto op = op_of("sbm:15,15,20:0.4:0.05", 2);
  auto dense = spectral_summary(op);
  auto iter = spectral_summary(op, 0);
  CHECK_FALSE(iter.dense);
  CHECK(iter.spectral_gap == doctest::Approx(dense.spectral_gap).epsilon(1e-6));
  CHECK(iter.largest_eigenvalue == doctest::Approx(dense.largest_eigenvalue).epsilon(1e-6));
  CHECK(std::abs(iter.dominant_eigenvector.dot(dense.dominant_eigenvector)) == doctest::Approx(1.0));
}

TEST_CASE("disconnected graph has zero gap") {
  std::vector<NodePair> e{{0, 1}, {2, 3}};
  auto op = normalized_operator(build_graph(e, 4));
  auto s = spectral_summary(op);
  CHECK_FALSE(s.connected);
  CHECK(s.spectral_gap == 0.0);
  Matrix x = Matrix::Ones(4, 2);
  CHECK_THROWS_AS(convergence_residual(op, s, x, 3), ContractError);
}

TEST_CASE("convergence residual contracts geometrically") {
  auto op = op_of("ring:21");
  auto s = spectral_summary(op);
  Matrix x = Matrix::Random(21, 3);
  const auto traj = convergence_trajectory(op, s, x, 40);
  REQUIRE(traj.size() == 41);
  const double rate = std::max(std::abs(1.0 - s.eigenvalues(1)), std::abs(1.0 - s.eigenvalues(20)));
  for (std::size_t k = 1; k < traj.size(); ++k) {
    CHECK(traj[k] <= traj[k - 1] + 1e-15);
    CHECK(traj[k] <= std::pow(rate, static_cast<double>(k)) * traj[0] * (1.0 + 1e-9));
  }
  CHECK(convergence_residual(op, x, 10) == doctest::Approx(traj[10]));
}

TEST_CASE("residual of the stationary direction is zero") {
  auto op = op_of("path:6");
  auto s = spectral_summary(op);
  Matrix x = s.dominant_eigenvector * 2.5;
  CHECK(convergence_residual(op, s, x, 0) == doctest::Approx(0.0).epsilon(1e-12));
}
