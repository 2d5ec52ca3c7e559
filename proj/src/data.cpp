#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gnnlab/error.hpp"
#include "gnnlab/experiments.hpp"

namespace gnnlab {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_fields(line));
  }
  return rows;
}

bool numeric_row(const std::vector<std::string>& row) {
  double x;
  return std::all_of(row.begin(), row.end(), [&](const std::string& s) { return parse_double(s, x); });
}

int class_count(const std::vector<int>& labels) {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

}  // namespace

Matrix read_feature_csv(const std::filesystem::path& path, Index rows) {
  auto data = read_rows(path);
  if (!data.empty() && !numeric_row(data.front())) data.erase(data.begin());
  if (static_cast<Index>(data.size()) != rows) {
    throw ContractError("feature CSV " + path.string() + " has " + std::to_string(data.size()) +
                        " rows, graph has " + std::to_string(rows) + " nodes");
  }
  if (data.empty()) throw ContractError("feature CSV is empty");
  const auto width = data.front().size();
  Matrix x(rows, static_cast<Index>(width));
  for (Index i = 0; i < rows; ++i) {
    const auto& row = data[static_cast<std::size_t>(i)];
    if (row.size() != width) throw ContractError("feature CSV row " + std::to_string(i) + " is ragged");
    for (std::size_t c = 0; c < width; ++c) {
      if (!parse_double(row[c], x(i, static_cast<Index>(c))) || !std::isfinite(x(i, static_cast<Index>(c)))) {
        throw ContractError("feature CSV row " + std::to_string(i) + " has a non-numeric entry");
      }
    }
  }
  return x;
}

std::vector<int> read_label_csv(const std::filesystem::path& path, Index rows) {
  auto data = read_rows(path);
  if (!data.empty() && !numeric_row(data.front())) data.erase(data.begin());
  if (static_cast<Index>(data.size()) != rows) {
    throw ContractError("label CSV " + path.string() + " has " + std::to_string(data.size()) +
                        " rows, graph has " + std::to_string(rows) + " nodes");
  }
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& row : data) {
    // "label" or "node,label"
    const std::string& s = row.back();
    int y = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), y);
    if (ec != std::errc() || p != s.data() + s.size() || y < -1) {
      throw ContractError("label CSV entry '" + s + "' is not a class id");
    }
    labels.push_back(y);
  }
  return labels;
}

Split stratified_split(const std::vector<int>& labels, const SplitSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x5b17);
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) by_class[labels[i]].push_back(static_cast<Index>(i));
  }
  Split s;
  std::vector<Index> rest;
  std::set<int> trained;
  for (auto& [cls, nodes] : by_class) {
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const auto take = std::min<std::size_t>(nodes.size(), static_cast<std::size_t>(spec.train_per_class));
    s.train.insert(s.train.end(), nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(take));
    rest.insert(rest.end(), nodes.begin() + static_cast<std::ptrdiff_t>(take), nodes.end());
    if (take > 0) trained.insert(cls);
  }
  std::sort(rest.begin(), rest.end());
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto need = static_cast<std::size_t>(spec.val_size) + static_cast<std::size_t>(spec.test_size);
  if (spec.val_size < 0 || spec.test_size < 0 || need > rest.size()) {
    throw ContractError("split needs " + std::to_string(need) + " val/test nodes, " +
                        std::to_string(rest.size()) + " available");
  }
  s.val.assign(rest.begin(), rest.begin() + spec.val_size);
  s.test.assign(rest.begin() + spec.val_size, rest.begin() + static_cast<std::ptrdiff_t>(need));
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  std::set<int> unseen;
  for (const auto* v : {&s.val, &s.test})
    for (Index i : *v)
      if (!trained.count(labels[static_cast<std::size_t>(i)])) unseen.insert(labels[static_cast<std::size_t>(i)]);
  s.unseen_classes.assign(unseen.begin(), unseen.end());
  return s;
}

SplitSpec default_split(const RunConfig& c, Index v) {
  SplitSpec s;
  s.train_per_class = c.train_per_class;
  // 500 / 1000 of Cora's 2708 nodes, scaled to v
  auto scaled = [&](int full) { return static_cast<int>(std::lround(full * static_cast<double>(v) / 2708.0)); };
  s.val_size = c.val_size >= 0 ? c.val_size : scaled(500);
  s.test_size = c.test_size >= 0 ? c.test_size : scaled(1000);
  return s;
}

namespace {

struct GraphSource {
  Graph graph;
  std::vector<int> blocks;
  bool has_blocks = false;
  std::string source;
  Warnings notices;
};

GraphSource graph_source(const RunConfig& c) {
  GraphSource g;
  if (!c.edges.empty()) {
    g.graph = read_edge_list_file(c.edges, &g.notices);
    g.source = "edges:" + std::filesystem::path(c.edges).filename().string();
    return g;
  }
  const std::string text = c.synthetic.empty() ? "sbm" : c.synthetic;
  SyntheticGraphConfig cfg = parse_synthetic(text, c.seed);
  SyntheticGraph s = generate_synthetic(cfg);
  g.graph = std::move(s.graph);
  g.has_blocks = cfg.kind == SyntheticKind::sbm;
  g.blocks = std::move(s.blocks);
  g.source = "synthetic:" + text;
  if (s.repair_edges > 0) {
    g.notices.push_back("added " + std::to_string(s.repair_edges) + " edges to connect the sbm sample");
  }
  return g;
}

}  // namespace

Dataset load_graph(const RunConfig& c) {
  GraphSource src = graph_source(c);
  Dataset d;
  d.graph = std::make_shared<const Graph>(std::move(src.graph));
  d.op = normalized_operator(*d.graph, &src.notices);
  d.source = src.source;
  d.notices = std::move(src.notices);
  return d;
}

Dataset load_features_labels(const RunConfig& c) {
  GraphSource src = graph_source(c);
  Dataset d;
  const Index v = src.graph.num_nodes();
  d.graph = std::make_shared<const Graph>(std::move(src.graph));
  d.op = normalized_operator(*d.graph, &src.notices);
  d.source = src.source;
  d.notices = std::move(src.notices);

  if (!c.labels.empty()) {
    d.labels = read_label_csv(c.labels, v);
  } else if (src.has_blocks) {
    d.labels = src.blocks;
  } else {
    throw ContractError("labels required: pass --labels or use an sbm graph");
  }
  d.num_classes = class_count(d.labels);
  if (d.num_classes < 1) throw ContractError("no labelled nodes");

  if (!c.features.empty()) {
    d.features = read_feature_csv(c.features, v);
  } else {
    Rng rng = make_rng(c.seed, 0xfea7);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix means(d.num_classes, c.feature_width);
    for (Index i = 0; i < means.size(); ++i) means.data()[i] = c.feature_shift * n(rng);
    d.features.resize(v, c.feature_width);
    for (Index i = 0; i < v; ++i) {
      const int y = d.labels[static_cast<std::size_t>(i)];
      for (Index f = 0; f < c.feature_width; ++f) d.features(i, f) = (y >= 0 ? means(y, f) : 0.0) + n(rng);
    }
  }

  d.targets = Matrix::Zero(v, d.num_classes);
  for (Index i = 0; i < v; ++i) {
    const int y = d.labels[static_cast<std::size_t>(i)];
    if (y >= 0) d.targets(i, y) = 1.0;
  }
  Split s = stratified_split(d.labels, default_split(c, v), c.seed);
  d.train = std::move(s.train);
  d.val = std::move(s.val);
  d.test = std::move(s.test);
  for (int cls : s.unseen_classes) {
    d.notices.push_back("class " + std::to_string(cls) + " appears only in val/test");
  }
  return d;
}

}  // namespace gnnlab
