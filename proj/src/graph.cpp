#include "gnnlab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gnnlab/error.hpp"

namespace gnnlab {

Graph build_graph(std::span<const NodePair> edges, Index num_nodes, Warnings* warnings) {
  if (num_nodes <= 0) throw ContractError("graph must have at least one node");
  Graph g;
  g.edges_.reserve(edges.size());
  Index self_pairs = 0;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw ContractError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                          ") has index out of range for v=" + std::to_string(num_nodes));
    }
    if (a == b) {
      ++self_pairs;
      continue;
    }
    g.edges_.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  if (self_pairs > 0 && warnings) {
    warnings->push_back("stripped " + std::to_string(self_pairs) +
                        " self-pair(s); self-loops are added by normalization");
  }

  g.adjacency_.assign(static_cast<std::size_t>(num_nodes), {});
  for (auto [a, b] : g.edges_) {
    g.adjacency_[static_cast<std::size_t>(a)].push_back(b);
    g.adjacency_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : g.adjacency_) std::sort(nb.begin(), nb.end());
  return g;
}

std::vector<double> Graph::self_looped_degrees() const {
  std::vector<double> d(adjacency_.size());
  for (std::size_t i = 0; i < adjacency_.size(); ++i) d[i] = static_cast<double>(adjacency_[i].size()) + 1.0;
  return d;
}

bool Graph::has_edge(Index i, Index j) const {
  const auto& nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<Index> Graph::components() const {
  const auto n = static_cast<std::size_t>(num_nodes());
  std::vector<Index> comp(n, -1);
  std::vector<Index> stack;
  Index next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    stack.push_back(static_cast<Index>(s));
    while (!stack.empty()) {
      Index u = stack.back();
      stack.pop_back();
      for (Index w : adjacency_[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return comp;
}

bool Graph::is_connected() const {
  auto comp = components();
  return std::all_of(comp.begin(), comp.end(), [](Index c) { return c == 0; });
}

bool Graph::is_bipartite() const {
  const auto n = static_cast<std::size_t>(num_nodes());
  std::vector<int> color(n, -1);
  std::vector<Index> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (color[s] >= 0) continue;
    color[s] = 0;
    queue.assign(1, static_cast<Index>(s));
    for (std::size_t head = 0; head < queue.size(); ++head) {
      Index u = queue[head];
      for (Index w : adjacency_[static_cast<std::size_t>(u)]) {
        auto& cw = color[static_cast<std::size_t>(w)];
        if (cw < 0) {
          cw = 1 - color[static_cast<std::size_t>(u)];
          queue.push_back(w);
        } else if (cw == color[static_cast<std::size_t>(u)]) {
          return false;
        }
      }
    }
  }
  return true;
}

std::string to_string(DropEdgeDegrees mode) {
  return mode == DropEdgeDegrees::resampled ? "resampled" : "frozen";
}

DropEdgeDegrees parse_dropedge_degrees(const std::string& text) {
  if (text == "resampled") return DropEdgeDegrees::resampled;
  if (text == "frozen") return DropEdgeDegrees::frozen;
  throw ContractError("unknown dropedge degree mode '" + text + "'");
}

PropagationOperator normalized_operator(const Graph& g, std::span<const double> degrees,
                                        Warnings* warnings) {
  const Index v = g.num_nodes();
  if (static_cast<Index>(degrees.size()) != v) throw ShapeError("degree vector length != v");
  PropagationOperator op;
  op.degrees.assign(degrees.begin(), degrees.end());
  op.graph = std::make_shared<const Graph>(g);

  std::vector<Eigen::Triplet<double, Index>> entries;
  entries.reserve(static_cast<std::size_t>(v + 2 * g.num_edges()));
  for (Index i = 0; i < v; ++i) {
    entries.emplace_back(i, i, 1.0 / degrees[static_cast<std::size_t>(i)]);
  }
  double delta = 0.0;
  for (auto [i, j] : g.edges()) {
    // One value mirrored into both triangles keeps the matrix exactly symmetric.
    const double c = 1.0 / std::sqrt(degrees[static_cast<std::size_t>(i)] * degrees[static_cast<std::size_t>(j)]);
    entries.emplace_back(i, j, c);
    entries.emplace_back(j, i, c);
    delta = std::max(delta, c);
  }
  op.matrix.resize(v, v);
  op.matrix.setFromTriplets(entries.begin(), entries.end());
  op.matrix.makeCompressed();
  op.delta = delta;
  if (g.num_edges() == 0 && warnings) warnings->push_back("graph has no edges; delta reported as 0");
  return op;
}

PropagationOperator normalized_operator(const Graph& g, Warnings* warnings) {
  auto d = g.self_looped_degrees();
  return normalized_operator(g, d, warnings);
}

Matrix propagate(const PropagationOperator& op, const Matrix& x) {
  if (x.rows() != op.size()) {
    throw ShapeError("propagate: feature rows " + std::to_string(x.rows()) + " != v " +
                     std::to_string(op.size()));
  }
  return op.matrix * x;
}

SparseMatrix random_walk_matrix(const Graph& g) {
  const Index v = g.num_nodes();
  std::vector<Eigen::Triplet<double, Index>> entries;
  for (Index i = 0; i < v; ++i) {
    const double w = 1.0 / g.self_looped_degree(i);
    entries.emplace_back(i, i, w);
    for (Index j : g.neighbors(i)) entries.emplace_back(i, j, w);
  }
  SparseMatrix m(v, v);
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return m;
}

Graph drop_edge_sample(const Graph& g, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ContractError("keep_prob must lie in (0, 1]");
  if (keep_prob == 1.0) return g;
  std::bernoulli_distribution keep(keep_prob);
  std::vector<NodePair> kept;
  kept.reserve(g.edges().size());
  for (const auto& e : g.edges()) {
    if (keep(rng)) kept.push_back(e);
  }
  return build_graph(kept, g.num_nodes());
}

Graph drop_edge_sample(const Graph& g, double keep_prob, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return drop_edge_sample(g, keep_prob, rng);
}

PropagationOperator drop_edge_operator(const Graph& g, double keep_prob, Rng& rng,
                                       DropEdgeDegrees mode) {
  Graph sampled = drop_edge_sample(g, keep_prob, rng);
  if (mode == DropEdgeDegrees::resampled) return normalized_operator(sampled);
  auto frozen = g.self_looped_degrees();
  return normalized_operator(sampled, frozen);
}

namespace {

void add_spanning_chain(std::vector<NodePair>& edges, Index v, SyntheticGraph& out) {
  Graph g = build_graph(edges, v);
  auto comp = g.components();
  // First node of each component, in node order.
  std::vector<Index> heads;
  Index seen = -1;
  for (Index i = 0; i < v; ++i) {
    if (comp[static_cast<std::size_t>(i)] > seen) {
      heads.push_back(i);
      seen = comp[static_cast<std::size_t>(i)];
    }
  }
  for (std::size_t c = 1; c < heads.size(); ++c) {
    edges.emplace_back(heads[c - 1], heads[c]);
    ++out.repair_edges;
  }
}

}  // namespace

SyntheticGraph generate_synthetic(const SyntheticGraphConfig& cfg) {
  SyntheticGraph out;
  std::vector<NodePair> edges;
  Index v = 0;
  switch (cfg.kind) {
    case SyntheticKind::complete:
      v = cfg.n;
      for (Index i = 0; i < v; ++i)
        for (Index j = i + 1; j < v; ++j) edges.emplace_back(i, j);
      break;
    case SyntheticKind::ring:
      v = cfg.n;
      if (v < 3) throw ContractError("ring needs at least 3 nodes");
      for (Index i = 0; i < v; ++i) edges.emplace_back(i, (i + 1) % v);
      break;
    case SyntheticKind::path:
      v = cfg.n;
      for (Index i = 0; i + 1 < v; ++i) edges.emplace_back(i, i + 1);
      break;
    case SyntheticKind::bipartite_complete:
      if (cfg.part_a <= 0 || cfg.part_b <= 0) throw ContractError("bipartite parts must be positive");
      v = cfg.part_a + cfg.part_b;
      for (Index i = 0; i < cfg.part_a; ++i)
        for (Index j = 0; j < cfg.part_b; ++j) edges.emplace_back(i, cfg.part_a + j);
      out.blocks.assign(static_cast<std::size_t>(v), 1);
      std::fill(out.blocks.begin(), out.blocks.begin() + cfg.part_a, 0);
      break;
    case SyntheticKind::sbm: {
      if (cfg.block_sizes.empty()) throw ContractError("sbm needs at least one block");
      for (double p : {cfg.p_intra, cfg.p_inter}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ContractError("sbm probability outside [0, 1]");
      }
      for (std::size_t b = 0; b < cfg.block_sizes.size(); ++b) {
        const Index s = cfg.block_sizes[b];
        if (s <= 0) throw ContractError("sbm block sizes must be positive");
        out.blocks.insert(out.blocks.end(), static_cast<std::size_t>(s), static_cast<int>(b));
        v += s;
      }
      Rng rng = make_rng(cfg.seed, 0x5b3);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (Index i = 0; i < v; ++i) {
        for (Index j = i + 1; j < v; ++j) {
          const bool same = out.blocks[static_cast<std::size_t>(i)] == out.blocks[static_cast<std::size_t>(j)];
          if (unif(rng) < (same ? cfg.p_intra : cfg.p_inter)) edges.emplace_back(i, j);
        }
      }
      if (cfg.ensure_connected) add_spanning_chain(edges, v, out);
      break;
    }
  }
  if (v <= 0) throw ContractError("synthetic graph must have at least one node");
  if (out.blocks.empty()) out.blocks.assign(static_cast<std::size_t>(v), 0);
  out.graph = build_graph(edges, v);
  out.bipartite = out.graph.num_edges() > 0 && out.graph.is_bipartite();
  return out;
}

SyntheticGraphConfig sbm_preset(std::uint64_t seed) {
  SyntheticGraphConfig cfg;
  cfg.kind = SyntheticKind::sbm;
  cfg.block_sizes = {100, 100, 100, 100};
  cfg.p_intra = 0.05;
  cfg.p_inter = 0.005;
  cfg.seed = seed;
  return cfg;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

Index parse_count(const std::string& s) {
  std::size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ContractError("expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) throw ContractError("expected an integer, got '" + s + "'");
  return static_cast<Index>(n);
}

double parse_real(const std::string& s) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ContractError("expected a number, got '" + s + "'");
  }
  if (pos != s.size()) throw ContractError("expected a number, got '" + s + "'");
  return x;
}

}  // namespace

SyntheticGraphConfig parse_synthetic(const std::string& text, std::uint64_t seed) {
  auto parts = split(text, ':');
  if (parts.empty()) throw ContractError("empty synthetic graph description");
  const std::string& kind = parts[0];
  SyntheticGraphConfig cfg;
  cfg.seed = seed;
  auto need = [&](std::size_t n) {
    if (parts.size() != n) throw ContractError("malformed synthetic graph description '" + text + "'");
  };
  if (kind == "complete" || kind == "ring" || kind == "path") {
    need(2);
    cfg.kind = kind == "complete" ? SyntheticKind::complete
               : kind == "ring"   ? SyntheticKind::ring
                                  : SyntheticKind::path;
    cfg.n = parse_count(parts[1]);
  } else if (kind == "bipartite" || kind == "bipartite_complete") {
    need(2);
    auto ab = split(parts[1], ',');
    if (ab.size() != 2) throw ContractError("bipartite expects A,B");
    cfg.kind = SyntheticKind::bipartite_complete;
    cfg.part_a = parse_count(ab[0]);
    cfg.part_b = parse_count(ab[1]);
  } else if (kind == "sbm") {
    if (parts.size() == 1) return sbm_preset(seed);
    need(4);
    cfg.kind = SyntheticKind::sbm;
    for (const auto& s : split(parts[1], ',')) cfg.block_sizes.push_back(parse_count(s));
    cfg.p_intra = parse_real(parts[2]);
    cfg.p_inter = parse_real(parts[3]);
  } else {
    throw ContractError("unknown synthetic graph kind '" + kind + "'");
  }
  return cfg;
}

Graph read_edge_list(std::istream& in, Warnings* warnings) {
  std::vector<NodePair> edges;
  Index declared = -1;
  Index max_index = -1;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.rfind("v=", 0) == 0) {
      declared = parse_count(first.substr(2));
      continue;
    }
    std::string second, extra;
    if (!(ls >> second) || (ls >> extra)) {
      throw ContractError("edge list line " + std::to_string(lineno) + ": expected 'i j'");
    }
    NodePair e{parse_count(first), parse_count(second)};
    if (e.first < 0 || e.second < 0) {
      throw ContractError("edge list line " + std::to_string(lineno) + ": negative index");
    }
    max_index = std::max({max_index, e.first, e.second});
    edges.push_back(e);
  }
  if (edges.empty() && declared < 0) throw ContractError("edge list contains no edges");
  const Index v = declared >= 0 ? declared : max_index + 1;
  return build_graph(edges, v, warnings);
}

Graph read_edge_list_file(const std::string& path, Warnings* warnings) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open edge list '" + path + "'");
  return read_edge_list(in, warnings);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "v=" << g.num_nodes() << '\n';
  for (auto [i, j] : g.edges()) out << i << ' ' << j << '\n';
}

}  // namespace gnnlab
