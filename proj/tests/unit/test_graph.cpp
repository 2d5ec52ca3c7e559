#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gnnlab/error.hpp"
#include "gnnlab/graph.hpp"

using namespace gnnlab;

namespace {

Graph triangle() {
  std::vector<NodePair> e{{0, 1}, {1, 2}, {0, 2}};
  return build_graph(e, 3);
}

}  // namespace

TEST_CASE("build_graph dedups, symmetrizes and drops self pairs") {
  std::vector<NodePair> e{{1, 0}, {0, 1}, {2, 2}, {1, 2}};
  Warnings w;
  Graph g = build_graph(e, 3, &w);
  CHECK(g.num_edges() == 2);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(2, 1));
  CHECK_FALSE(g.has_edge(0, 2));
  CHECK(w.size() == 1);
  CHECK(g.edges().front() == NodePair{0, 1});
  CHECK(g.is_connected());

  std::vector<NodePair> bad{{0, 5}};
  CHECK_THROWS_AS(build_graph(bad, 3), ContractError);
  CHECK_THROWS_AS(build_graph({}, 0), ContractError);
}

TEST_CASE("components and bipartiteness") {
  std::vector<NodePair> e{{0, 1}, {2, 3}};
  Graph g = build_graph(e, 5);
  CHECK_FALSE(g.is_connected());
  auto c = g.components();
  CHECK(c == std::vector<Index>{0, 0, 1, 1, 2});
  CHECK(g.is_bipartite());
  CHECK_FALSE(triangle().is_bipartite());
}

TEST_CASE("normalized operator of K_3 is J/3") {
  auto op = normalized_operator(triangle());
  Matrix p = op.dense();
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(p(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(op.delta == doctest::Approx(1.0 / 3.0));
  CHECK(op.degrees == std::vector<double>{3.0, 3.0, 3.0});
}

TEST_CASE("normalized operator of the 3-path") {
  std::vector<NodePair> e{{0, 1}, {1, 2}};
  auto op = normalized_operator(build_graph(e, 3));
  Matrix p = op.dense();
  // d̂ = (2, 3, 2)
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(p(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(p(0, 2) == 0.0);
  CHECK(op.delta == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK((p - p.transpose()).norm() == 0.0);
}

TEST_CASE("isolated node keeps its self loop") {
  std::vector<NodePair> e{{0, 1}};
  auto op = normalized_operator(build_graph(e, 3));
  CHECK(op.dense()(2, 2) == 1.0);
}

TEST_CASE("random walk rows sum to one") {
  std::vector<NodePair> e{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}};
  Matrix rw = Matrix(random_walk_matrix(build_graph(e, 4)));
  for (Index i = 0; i < 4; ++i) CHECK(rw.row(i).sum() == doctest::Approx(1.0));
}

TEST_CASE("drop_edge_sample extremes and determinism") {
  auto g = generate_synthetic(parse_synthetic("complete:8", 0)).graph;
  CHECK(drop_edge_sample(g, 1.0, 3).num_edges() == g.num_edges());
  CHECK(drop_edge_sample(g, 1e-9, 3).num_edges() == 0);
  CHECK_THROWS_AS(drop_edge_sample(g, 0.0, 3), ContractError);
  auto a = drop_edge_sample(g, 0.5, 11), b = drop_edge_sample(g, 0.5, 11);
  CHECK(a.edges() == b.edges());
  CHECK_THROWS_AS(drop_edge_sample(g, 1.5, 0), ContractError);
}

TEST_CASE("drop_edge_operator degree modes") {
  auto g = generate_synthetic(parse_synthetic("complete:6", 0)).graph;
  Rng r1 = make_rng(5), r2 = make_rng(5);
  auto res = drop_edge_operator(g, 0.5, r1, DropEdgeDegrees::resampled);
  auto fro = drop_edge_operator(g, 0.5, r2, DropEdgeDegrees::frozen);
  // Same edge draw; frozen keeps d̂ = 6 everywhere.
  for (double d : fro.degrees) CHECK(d == 6.0);
  CHECK(res.graph->edges() == fro.graph->edges());
  for (Index i = 0; i < 6; ++i) CHECK(res.degrees[static_cast<std::size_t>(i)] == res.graph->self_looped_degree(i));
  CHECK(parse_dropedge_degrees("frozen") == DropEdgeDegrees::frozen);
  CHECK(to_string(DropEdgeDegrees::resampled) == "resampled");
  CHECK_THROWS(parse_dropedge_degrees("sometimes"));
}

TEST_CASE("synthetic generators") {
  auto k = generate_synthetic(parse_synthetic("complete:5", 0));
  CHECK(k.graph.num_edges() == 10);
  auto r = generate_synthetic(parse_synthetic("ring:7", 0));
  CHECK(r.graph.num_edges() == 7);
  for (Index i = 0; i < 7; ++i) CHECK(r.graph.degree(i) == 2);
  auto p = generate_synthetic(parse_synthetic("path:4", 0));
  CHECK(p.graph.num_edges() == 3);
  auto b = generate_synthetic(parse_synthetic("bipartite:2,3", 0));
  CHECK(b.graph.num_edges() == 6);
  CHECK(b.bipartite);
  CHECK(b.graph.is_bipartite());

  auto s = generate_synthetic(sbm_preset(4));
  CHECK(s.graph.num_nodes() == 400);
  CHECK(s.graph.is_connected());
  CHECK(s.blocks[0] == 0);
  CHECK(s.blocks[399] == 3);
  auto s2 = generate_synthetic(sbm_preset(4));
  CHECK(s.graph.edges() == s2.graph.edges());

  auto custom = generate_synthetic(parse_synthetic("sbm:10,20:0.5:0.1", 1));
  CHECK(custom.graph.num_nodes() == 30);
  CHECK(custom.blocks[10] == 1);

  CHECK_THROWS(parse_synthetic("star:4", 0));
  CHECK_THROWS(parse_synthetic("ring:x", 0));
  CHECK_THROWS(generate_synthetic(parse_synthetic("ring:2", 0)));
}

TEST_CASE("edge list io") {
  std::istringstream in("# comment\nv=5\n0 1\n1 2 \n\n3 4\n");
  Graph g = read_edge_list(in);
  CHECK(g.num_nodes() == 5);
  CHECK(g.num_edges() == 3);

  std::ostringstream out;
  write_edge_list(out, g);
  std::istringstream back(out.str());
  CHECK(read_edge_list(back).edges() == g.edges());

  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(read_edge_list(empty), doctest::Contains("no edges"), ContractError);
  std::istringstream junk("0 one\n");
  CHECK_THROWS(read_edge_list(junk));
  CHECK_THROWS(read_edge_list_file("/nonexistent/edges.txt"));
}
