#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gnnlab/random.hpp"
#include "gnnlab/types.hpp"

namespace gnnlab {

using NodePair = std::pair<Index, Index>;

// Immutable undirected simple graph. Self-loops are never stored; the
// normalized operator adds them implicitly (d̂_i = d_i + 1).
class Graph {
 public:
  Graph() = default;

  Index num_nodes() const noexcept { return static_cast<Index>(adjacency_.size()); }
  Index num_edges() const noexcept { return static_cast<Index>(edges_.size()); }

  // Canonical edge list: i < j, sorted lexicographically.
  const std::vector<NodePair>& edges() const noexcept { return edges_; }
  // Sorted neighbor list of node i (self excluded).
  const std::vector<Index>& neighbors(Index i) const { return adjacency_.at(static_cast<std::size_t>(i)); }

  Index degree(Index i) const { return static_cast<Index>(neighbors(i).size()); }
  double self_looped_degree(Index i) const { return static_cast<double>(degree(i)) + 1.0; }
  std::vector<double> self_looped_degrees() const;

  bool has_edge(Index i, Index j) const;
  bool is_connected() const;
  // Two-colorability of the loop-free graph.
  bool is_bipartite() const;
  // Component id per node, numbered in order of first node.
  std::vector<Index> components() const;

  friend Graph build_graph(std::span<const NodePair> edges, Index num_nodes, Warnings* warnings);

 private:
  std::vector<NodePair> edges_;
  std::vector<std::vector<Index>> adjacency_;
};

// Deduplicates, symmetrizes and strips self-pairs (with a warning).
// Throws ContractError on num_nodes == 0 or an out-of-range index.
Graph build_graph(std::span<const NodePair> edges, Index num_nodes, Warnings* warnings = nullptr);

enum class DropEdgeDegrees { resampled, frozen };

std::string to_string(DropEdgeDegrees mode);
DropEdgeDegrees parse_dropedge_degrees(const std::string& text);

// P_sym = D̂^{-1/2} Â D̂^{-1/2} in row-compressed form.
struct PropagationOperator {
  SparseMatrix matrix;
  // Max off-diagonal coupling 1/sqrt(d̂_i d̂_j); 0 when the graph has no edges.
  double delta = 0.0;
  // Degrees used for scaling (self-loop included).
  std::vector<double> degrees;
  // Graph whose adjacency the operator encodes.
  std::shared_ptr<const Graph> graph;

  Index size() const noexcept { return matrix.rows(); }
  Matrix dense() const { return Matrix(matrix); }
};

PropagationOperator normalized_operator(const Graph& g, Warnings* warnings = nullptr);

// Operator over the adjacency of `g` scaled by externally supplied self-looped
// degrees (the frozen-degree DropEdge variant).
PropagationOperator normalized_operator(const Graph& g, std::span<const double> degrees,
                                        Warnings* warnings = nullptr);

// Returns P_sym · X. Throws ShapeError when rows(X) != v.
Matrix propagate(const PropagationOperator& op, const Matrix& x);

// Row-stochastic sibling D̂^{-1} Â.
SparseMatrix random_walk_matrix(const Graph& g);

// Keeps each undirected edge independently with probability keep_prob.
Graph drop_edge_sample(const Graph& g, double keep_prob, Rng& rng);
Graph drop_edge_sample(const Graph& g, double keep_prob, std::uint64_t seed);

// Samples a graph and builds its operator; degrees follow `mode`.
PropagationOperator drop_edge_operator(const Graph& g, double keep_prob, Rng& rng,
                                       DropEdgeDegrees mode);

enum class SyntheticKind { complete, ring, path, bipartite_complete, sbm };

struct SyntheticGraphConfig {
  SyntheticKind kind = SyntheticKind::sbm;
  // complete / ring / path: node count. bipartite_complete: part sizes a, b.
  Index n = 0;
  Index part_a = 0;
  Index part_b = 0;
  std::vector<Index> block_sizes;
  double p_intra = 0.05;
  double p_inter = 0.005;
  std::uint64_t seed = 0;
  bool ensure_connected = true;
};

struct SyntheticGraph {
  Graph graph;
  // Block id per node (sbm), part id (bipartite_complete), zeros otherwise.
  std::vector<int> blocks;
  bool bipartite = false;
  // Edges added by the spanning chain that joins disconnected sbm components.
  Index repair_edges = 0;
};

SyntheticGraph generate_synthetic(const SyntheticGraphConfig& cfg);

// Parses "complete:N", "ring:N", "path:N", "bipartite:A,B",
// "sbm" (desk preset) or "sbm:S1,S2,...:P_IN:P_OUT".
SyntheticGraphConfig parse_synthetic(const std::string& text, std::uint64_t seed);

// Desk-scale preset: 4 blocks x 100 nodes, intra 0.05, inter 0.005.
SyntheticGraphConfig sbm_preset(std::uint64_t seed);

// Edge-list text: one "i j" pair per line, '#' comments, optional "v=<N>" header.
Graph read_edge_list(std::istream& in, Warnings* warnings = nullptr);
Graph read_edge_list_file(const std::string& path, Warnings* warnings = nullptr);
void write_edge_list(std::ostream& out, const Graph& g);

}  // namespace gnnlab
