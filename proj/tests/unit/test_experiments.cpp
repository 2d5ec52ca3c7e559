#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gnnlab/error.hpp"
#include "gnnlab/experiments.hpp"

using namespace gnnlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("gnnlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config round trip and unknown keys") {
  RunConfig c;
  c.seed = 9;
  c.k = {1, 3};
  c.tricks = {"none", "bn_train"};
  Json j = c;
  RunConfig back;
  from_json(j, back);
  CHECK(Json(back) == j);

  Json bad = j;
  bad["lerning_rate"] = 0.1;
  CHECK_THROWS_AS(from_json(bad, back), ContractError);
  Json wrong = j;
  wrong["epochs"] = "many";
  CHECK_THROWS_AS(from_json(wrong, back), ContractError);
}

TEST_CASE("partial config keeps defaults") {
  const auto dir = scratch("cfg");
  write(dir / "c.json", R"({"epochs": 7, "depths": [3]})");
  RunConfig c = load_config_file(dir / "c.json");
  CHECK(c.epochs == 7);
  CHECK(c.depths == std::vector<int>{3});
  CHECK(c.lr == 0.01);
  CHECK(c.hidden == 16);
  write(dir / "broken.json", "{epochs: 7");
  CHECK_THROWS_AS(load_config_file(dir / "broken.json"), ContractError);
}

TEST_CASE("result config drops out and jobs only") {
  RunConfig a, b;
  b.out = "elsewhere";
  b.jobs = 4;
  CHECK(result_config(a) == result_config(b));
  b.seed = 1;
  CHECK(config_hash(result_config(a)) != config_hash(result_config(b)));
}

TEST_CASE("validation names the field") {
  RunConfig c;
  c.keep_prob = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("keep_prob"), ContractError);
  c = RunConfig{};
  c.tricks = {"dropout"};
  CHECK_THROWS(c.validate());
  c = RunConfig{};
  c.epsilons = {0.5};
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("split of three nodes with one per class") {
  const std::vector<int> labels{0, 1, 0};
  SplitSpec s{1, 0, 1};
  Split sp = stratified_split(labels, s, 0);
  CHECK(sp.train.size() == 2);
  CHECK(sp.test.size() == 1);
  CHECK(labels[static_cast<std::size_t>(sp.test[0])] == 0);
  CHECK(sp.unseen_classes.empty());
  CHECK_THROWS_AS(stratified_split(labels, SplitSpec{1, 1, 1}, 0), ContractError);
}

TEST_CASE("split reports classes missing from train") {
  const std::vector<int> labels{0, 0, 0, 1, -1};
  Split sp = stratified_split(labels, SplitSpec{0, 1, 1}, 3);
  CHECK(sp.train.empty());
  CHECK(sp.val.size() + sp.test.size() == 2);
  CHECK(!sp.unseen_classes.empty());
  for (Index i : sp.val) CHECK(labels[static_cast<std::size_t>(i)] >= 0);
}

TEST_CASE("split is seeded and sorted") {
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 3);
  SplitSpec s{5, 10, 20};
  Split a = stratified_split(labels, s, 4), b = stratified_split(labels, s, 4), c = stratified_split(labels, s, 5);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);
  CHECK(std::is_sorted(a.val.begin(), a.val.end()));
  std::vector<int> per(3, 0);
  for (Index i : a.train) ++per[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  CHECK(per == std::vector<int>{5, 5, 5});
}

TEST_CASE("default split scales with node count") {
  RunConfig c;
  SplitSpec s = default_split(c, 2708);
  CHECK(s.val_size == 500);
  CHECK(s.test_size == 1000);
  s = default_split(c, 400);
  CHECK(s.val_size == 74);
  CHECK(s.test_size == 148);
  c.val_size = 3;
  CHECK(default_split(c, 400).val_size == 3);
}

TEST_CASE("feature and label files") {
  const auto dir = scratch("csv");
  write(dir / "x.csv", "a,b\n1,2\n3,4.5\n\n-1e-3,0\n");
  Matrix x = read_feature_csv(dir / "x.csv", 3);
  CHECK(x.rows() == 3);
  CHECK(x(1, 1) == 4.5);
  CHECK(x(2, 0) == -1e-3);
  CHECK_THROWS_WITH_AS(read_feature_csv(dir / "x.csv", 4), doctest::Contains("3 rows"), ContractError);
  write(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_feature_csv(dir / "ragged.csv", 2), ContractError);
  write(dir / "nan.csv", "1\nnan\n");
  CHECK_THROWS_AS(read_feature_csv(dir / "nan.csv", 2), ContractError);

  write(dir / "y.csv", "node,label\n0,2\n1,-1\n2,0\n");
  CHECK(read_label_csv(dir / "y.csv", 3) == std::vector<int>{2, -1, 0});
  write(dir / "ybad.csv", "0\n1.5\n");
  CHECK_THROWS_AS(read_label_csv(dir / "ybad.csv", 2), ContractError);
  CHECK_THROWS_AS(read_label_csv(dir / "missing.csv", 2), ContractError);
}

TEST_CASE("edge list input needs labels and matches row counts") {
  const auto dir = scratch("edges");
  write(dir / "g.txt", "0 1\n1 2\n2 0\n2 3\n");
  write(dir / "y.csv", "0\n0\n1\n1\n");
  RunConfig c;
  c.edges = (dir / "g.txt").string();
  CHECK_THROWS_WITH_AS(load_features_labels(c), doctest::Contains("labels"), ContractError);
  c.labels = (dir / "y.csv").string();
  c.train_per_class = 1;
  c.val_size = 1;
  c.test_size = 1;
  Dataset d = load_features_labels(c);
  CHECK(d.graph->num_nodes() == 4);
  CHECK(d.num_classes == 2);
  CHECK(d.features.rows() == 4);
  CHECK(d.targets(2, 1) == 1.0);
  write(dir / "x.csv", "1\n2\n3\n");
  c.features = (dir / "x.csv").string();
  CHECK_THROWS_AS(load_features_labels(c), ContractError);

  write(dir / "empty.txt", "# nothing\n");
  RunConfig e;
  e.edges = (dir / "empty.txt").string();
  CHECK_THROWS(load_graph(e));
}

TEST_CASE("metrics flatten every numeric leaf") {
  Json s = {{"a", 1}, {"b", {{"c", 2.5}, {"d", "text"}}}, {"e", Json::array({3, true})}, {"config", {{"x", 4}}}};
  const std::string m = metrics_csv(s);
  CHECK(m.find("a,1") != std::string::npos);
  CHECK(m.find("b.c,2.5") != std::string::npos);
  CHECK(m.find("e[0],3") != std::string::npos);
  CHECK(m.find("config") == std::string::npos);
  CHECK(m.find("text") == std::string::npos);
}

TEST_CASE("analyze on the triangle") {
  RunConfig c;
  c.command = "analyze";
  c.synthetic = "complete:3";
  c.epsilons = {0.25};
  ReportBundle b = run_command(c);
  const Json& mix = b.summary["mixing"][0];
  CHECK(mix["t_mix"] == 2);
  CHECK(mix["lower_bound"].get<double>() == doctest::Approx(std::log(2.0)));
  CHECK(mix["upper_bound"].get<double>() == doctest::Approx(2.0 * std::log(12.0)));
  CHECK(mix["contained"] == true);
  CHECK(b.summary["spectral"]["spectral_gap"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("bundles are reproducible and written in full") {
  const auto dir = scratch("bundle");
  RunConfig c;
  c.command = "gradflow";
  c.epochs = 3;
  c.depths = {2};
  c.out = (dir / "a").string();
  write_bundle(run_command(c), c.out);
  c.out = (dir / "b").string();
  c.jobs = 2;
  write_bundle(run_command(c), c.out);
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  CHECK(slurp(dir / "a" / "peaks.csv") == slurp(dir / "b" / "peaks.csv"));
  for (const char* f : {"metrics.csv", "run_meta.json", "gradflow_gcn_d2_s0.csv"}) CHECK(fs::exists(dir / "a" / f));
  Json meta = Json::parse(slurp(dir / "a" / "run_meta.json"));
  CHECK(meta.contains("decisions"));
  CHECK(meta["config"]["out"] == (dir / "a").string());
}

TEST_CASE("decouple cells resume from the cache") {
  const auto dir = scratch("cells");
  RunConfig c;
  c.command = "decouple";
  c.epochs = 4;
  c.l = {0, 1};
  c.out = dir.string();
  ReportBundle first = run_command(c);
  CHECK(first.meta["cached_cells"] == 0);
  ReportBundle second = run_command(c);
  CHECK(second.meta["cached_cells"] == 2);
  CHECK(first.summary == second.summary);
  c.seed = 1;
  CHECK(run_command(c).meta["cached_cells"] == 0);
}

TEST_CASE("bound sweep violations are replayable") {
  const auto dir = scratch("bounds");
  RunConfig c;
  c.command = "bounds";
  c.model = "gcn_batchnorm";
  c.sweep = 5;
  c.ordering_samples = 2;
  ReportBundle b = run_command(c);
  CHECK(b.exit_code == 0);
  CHECK(b.summary["sweeps"][0]["violations"] == 0);

  BoundInstance inst = random_bound_instance(ModelKind::gcn, BoundSweepConfig{}, 7);
  write(dir / "inst.json", instance_to_json(inst).dump());
  c.replay = (dir / "inst.json").string();
  ReportBundle r = run_command(c);
  CHECK(r.summary["replay"]["sound"] == verify_instance(inst).sound());
  CHECK(r.exit_code == (verify_instance(inst).sound() ? 0 : 3));
  CHECK(instance_to_json(instance_from_json(instance_to_json(inst))) == instance_to_json(inst));
}
