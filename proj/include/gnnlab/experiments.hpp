#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnlab/bounds.hpp"
#include "gnnlab/trainer.hpp"

namespace gnnlab {

using Json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kVersion = "0.1.0";

// Every field maps to one CLI flag (dashes) and one config key (underscores).
struct RunConfig {
  std::string command;

  // Graph source: edge list path or synthetic spec; neither means the SBM preset.
  std::string edges;
  std::string synthetic;
  std::string features;
  std::string labels;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out = "gnnlab_out";

  // Random features: N(0,1) noise around per-class means of scale feature_shift.
  int feature_width = 16;
  double feature_shift = 1.0;

  // Split: per-class train count; val/test < 0 scale 500 and 1000 by v / 2708.
  int train_per_class = 20;
  int val_size = -1;
  int test_size = -1;

  int epochs = 200;
  double lr = 0.01;
  double weight_decay = 0.0;
  int hidden = 16;
  int seeds = 1;

  std::string dropedge_degrees = "resampled";
  double keep_prob = 0.7;
  bool learn_omega = false;
  double alpha = 0.1;
  double lambda = 0.5;
  double omega = 0.5;

  // analyze
  int energy_steps = 128;
  std::vector<double> epsilons{0.25, 0.1, 0.01};

  // decouple
  std::vector<int> k{2};
  std::vector<int> l{0, 64};
  std::vector<std::string> tricks{"none"};

  // gradflow
  std::vector<std::string> models{"resgcn", "gcn", "gcnii"};
  std::vector<int> depths{8, 64};

  // bounds
  std::string model = "all";
  int depth = 0;  // 0: random depth per instance in [1, 16]
  int sweep = 100;
  int ordering_samples = 100;
  std::string replay;

  // Throws ContractError naming the offending field.
  void validate() const;
};

void to_json(Json& j, const RunConfig& c);
// Unknown keys are rejected.
void from_json(const Json& j, RunConfig& c);
RunConfig load_config_file(const std::filesystem::path& path);

// Config entries that affect results; `out` and `jobs` are left to run_meta.
Json result_config(const RunConfig& c);

struct Dataset {
  std::shared_ptr<const Graph> graph;
  PropagationOperator op;
  std::string source;
  Matrix features;
  Matrix targets;  // one-hot, zero rows for unlabelled nodes
  std::vector<int> labels;  // -1: unlabelled
  int num_classes = 0;
  std::vector<Index> train, val, test;
  Warnings notices;
};

// Graph only (analyze).
Dataset load_graph(const RunConfig& c);

// Reads a numeric CSV (optional header row). Throws ContractError on a
// row count different from `rows` or ragged rows.
Matrix read_feature_csv(const std::filesystem::path& path, Index rows);
// One integer class id per row (optional header); -1 marks unlabelled nodes.
std::vector<int> read_label_csv(const std::filesystem::path& path, Index rows);

struct SplitSpec {
  int train_per_class = 20;
  int val_size = 0;
  int test_size = 0;
};

struct Split {
  std::vector<Index> train, val, test;
  // Classes present in val/test but absent from train.
  std::vector<int> unseen_classes;
};

// Seeded class-stratified split; every index list is sorted.
Split stratified_split(const std::vector<int>& labels, const SplitSpec& spec, std::uint64_t seed);
SplitSpec default_split(const RunConfig& c, Index num_nodes);

// Graph, features, labels, one-hot targets and masks.
Dataset load_features_labels(const RunConfig& c);

struct ReportBundle {
  Json summary;
  // file name -> contents
  std::map<std::string, std::string> csv;
  // Non-CSV side files, e.g. a serialized bound violation.
  std::map<std::string, std::string> extra;
  Json meta;
  int exit_code = 0;
};

ReportBundle cmd_analyze(const RunConfig& c);
ReportBundle cmd_decouple(const RunConfig& c);
ReportBundle cmd_gradflow(const RunConfig& c);
ReportBundle cmd_bounds(const RunConfig& c);
ReportBundle run_command(const RunConfig& c);

// summary.json, metrics.csv (one row per numeric leaf of the summary), the
// trajectory CSVs and run_meta.json.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

// Flattened numeric leaves of a JSON document as "path,value" rows.
std::string metrics_csv(const Json& summary);

// FNV-1a over the canonical dump.
std::uint64_t config_hash(const Json& j);

Json to_json(const BoundReport& r);
Json instance_to_json(const BoundInstance& inst);
BoundInstance instance_from_json(const Json& j);

}  // namespace gnnlab
