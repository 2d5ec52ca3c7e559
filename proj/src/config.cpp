#include <fstream>
#include <set>

#include "gnnlab/error.hpp"
#include "gnnlab/experiments.hpp"

namespace gnnlab {

namespace {

// One entry per field keeps the JSON keys and the struct in one place.
template <class Fn>
void for_each_field(RunConfig& c, Fn&& fn) {
  fn("command", c.command);
  fn("edges", c.edges);
  fn("synthetic", c.synthetic);
  fn("features", c.features);
  fn("labels", c.labels);
  fn("seed", c.seed);
  fn("jobs", c.jobs);
  fn("out", c.out);
  fn("feature_width", c.feature_width);
  fn("feature_shift", c.feature_shift);
  fn("train_per_class", c.train_per_class);
  fn("val_size", c.val_size);
  fn("test_size", c.test_size);
  fn("epochs", c.epochs);
  fn("lr", c.lr);
  fn("weight_decay", c.weight_decay);
  fn("hidden", c.hidden);
  fn("seeds", c.seeds);
  fn("dropedge_degrees", c.dropedge_degrees);
  fn("keep_prob", c.keep_prob);
  fn("learn_omega", c.learn_omega);
  fn("alpha", c.alpha);
  fn("lambda", c.lambda);
  fn("omega", c.omega);
  fn("energy_steps", c.energy_steps);
  fn("epsilons", c.epsilons);
  fn("k", c.k);
  fn("l", c.l);
  fn("tricks", c.tricks);
  fn("models", c.models);
  fn("depths", c.depths);
  fn("model", c.model);
  fn("depth", c.depth);
  fn("sweep", c.sweep);
  fn("ordering_samples", c.ordering_samples);
  fn("replay", c.replay);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError("config: " + what);
}

}  // namespace

void RunConfig::validate() const {
  require(edges.empty() || synthetic.empty(), "--edges and --synthetic are mutually exclusive");
  require(jobs >= 1, "jobs must be >= 1");
  require(feature_width >= 1, "feature_width must be >= 1");
  require(train_per_class >= 0, "train_per_class must be >= 0");
  require(epochs >= 0, "epochs must be >= 0");
  require(lr >= 0.0, "lr must be >= 0");
  require(hidden >= 1, "hidden must be >= 1");
  require(seeds >= 1, "seeds must be >= 1");
  require(keep_prob > 0.0 && keep_prob <= 1.0, "keep_prob must lie in (0, 1]");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(lambda > 0.0, "lambda must be > 0");
  require(energy_steps >= 0, "energy_steps must be >= 0");
  for (double e : epsilons) require(e > 0.0 && e < 0.5, "epsilons must lie in (0, 1/2)");
  for (int x : k) require(x >= 0, "k values must be >= 0");
  for (int x : l) require(x >= 0, "l values must be >= 0");
  for (int x : depths) require(x >= 1, "depths must be >= 1");
  require(depth >= 0, "depth must be >= 0");
  require(sweep >= 0 && ordering_samples >= 0, "sweep sizes must be >= 0");
  parse_dropedge_degrees(dropedge_degrees);
  for (const auto& t : tricks) parse_trick(t);
  for (const auto& m : models) parse_model_kind(m);
  if (model != "all") parse_model_kind(model);
}

void to_json(Json& j, const RunConfig& c) {
  j = Json::object();
  for_each_field(const_cast<RunConfig&>(c), [&](const char* key, const auto& v) { j[key] = v; });
}

void from_json(const Json& j, RunConfig& c) {
  if (!j.is_object()) throw ContractError("config: top level must be an object");
  std::set<std::string> known;
  for_each_field(c, [&](const char* key, auto& v) {
    known.insert(key);
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(v);
    } catch (const nlohmann::json::exception&) {
      throw ContractError(std::string("config: bad value for '") + key + "'");
    }
  });
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ContractError("config: unknown key '" + key + "'");
  }
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config file " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c;
  from_json(j, c);
  return c;
}

Json result_config(const RunConfig& c) {
  Json j = c;
  j.erase("out");
  j.erase("jobs");
  return j;
}

std::uint64_t config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gnnlab
