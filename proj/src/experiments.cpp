#include "gnnlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Core>

#include "gnnlab/error.hpp"
#include "gnnlab/parallel.hpp"
#include "gnnlab/smoothing.hpp"

namespace gnnlab {

namespace {

// Non-finite values serialize as null; CSVs carry them as nan/inf.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    out_.precision(17);
    row(header);
  }

  template <class... Ts>
  void add(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cells, first = false), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::ostringstream out_;
};

std::string eps_tag(double eps) {
  std::ostringstream s;
  s << eps;
  return s.str();
}

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::uint64_t run_seed(const RunConfig& c, int i) { return derive_seed(c.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(i)); }

// Content fingerprint of the loaded data, so cached cells notice edited inputs.
std::uint64_t data_hash(const Dataset& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : d.graph->edges()) mix(&e, sizeof e);
  mix(d.features.data(), sizeof(double) * static_cast<std::size_t>(d.features.size()));
  mix(d.labels.data(), sizeof(int) * d.labels.size());
  for (const auto* v : {&d.train, &d.val, &d.test}) mix(v->data(), sizeof(Index) * v->size());
  return h;
}

Json graph_json(const Dataset& d) {
  return {{"source", d.source},
          {"nodes", d.graph->num_nodes()},
          {"edges", d.graph->num_edges()},
          {"connected", d.graph->is_connected()},
          {"bipartite", d.graph->is_bipartite()},
          {"delta", d.op.delta}};
}

Json data_json(const Dataset& d) {
  Json j = graph_json(d);
  j["classes"] = d.num_classes;
  j["feature_width"] = d.features.cols();
  j["train"] = d.train.size();
  j["val"] = d.val.size();
  j["test"] = d.test.size();
  return j;
}

Json envelope(const RunConfig& c) {
  return {{"schema_version", kSchemaVersion}, {"command", c.command}, {"config", result_config(c)}};
}

Json meta(const RunConfig& c) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return {{"gnnlab_version", kVersion},
          {"schema_version", kSchemaVersion},
          {"eigen_version", eigen.str()},
          {"compiler", __VERSION__},
          {"cxx_standard", __cplusplus},
          {"timestamp", ts.str()},
          {"jobs", c.jobs},
          {"out", c.out},
          {"config", Json(c)},
          {"decisions",
           {{"dropedge_degrees", c.dropedge_degrees},
            {"dropedge_keep_prob", c.keep_prob},
            {"learn_omega", c.learn_omega},
            {"loss", "half_mse"},
            {"optimizer", "full-batch gradient descent"},
            {"gcnii_beta", "log(lambda / l + 1)"},
            {"bound_activation_slope", 1.0},
            {"weight_init", "glorot_uniform"},
            {"split_scaling", "val = 500 v / 2708, test = 1000 v / 2708"}}}};
}

ReportBundle bundle_for(const RunConfig& c) {
  ReportBundle b;
  b.summary = envelope(c);
  b.meta = meta(c);
  return b;
}

void add_notices(ReportBundle& b, const Warnings& n) {
  Json& list = b.summary["notices"];
  if (list.is_null()) list = Json::array();
  for (const auto& s : n) list.push_back(s);
}

}  // namespace

// ---------------------------------------------------------------- analyze

ReportBundle cmd_analyze(const RunConfig& c) {
  c.validate();
  ReportBundle b = bundle_for(c);
  Dataset d = load_graph(c);
  Warnings notices = d.notices;
  const Graph& g = *d.graph;

  const SpectralSummary s = spectral_summary(d.op);
  b.summary["graph"] = graph_json(d);
  b.summary["spectral"] = {{"spectral_gap", s.spectral_gap},
                           {"largest_eigenvalue", s.largest_eigenvalue},
                           {"connected", s.connected},
                           {"dense", s.dense},
                           {"residual", s.residual}};
  if (s.dense) {
    Csv eig({"index", "eigenvalue"});
    for (Index i = 0; i < s.eigenvalues.size(); ++i) eig.add(i + 1, s.eigenvalues(i));
    b.csv["eigenvalues.csv"] = eig.str();
  }

  Json mixing = Json::array();
  if (!s.connected) {
    notices.push_back("graph is disconnected; mixing skipped");
  } else {
    for (double eps : c.epsilons) {
      try {
        MixingReport r = mixing_time_empirical(g, eps, &s);
        const std::string file = "mixing_" + eps_tag(eps) + ".csv";
        Csv csv({"t", "distance"});
        for (std::size_t t = 0; t < r.distance.size(); ++t) csv.add(t, r.distance[t]);
        b.csv[file] = csv.str();
        mixing.push_back({{"epsilon", eps},
                          {"t_mix", r.t_mix},
                          {"lower_bound", r.lower_bound},
                          {"upper_bound", r.upper_bound},
                          {"pi_min", r.pi_min},
                          {"contained", r.contained},
                          {"monotone", r.monotone},
                          {"csv", file}});
      } catch (const ConvergenceError& e) {
        notices.push_back("mixing at epsilon " + eps_tag(eps) + " did not finish: " + e.what());
      }
    }
  }
  b.summary["mixing"] = mixing;

  Rng rng = make_rng(c.seed, 0xe7e);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix x(g.num_nodes(), c.feature_width);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  const auto energy = energy_trajectory(g, d.op, x, c.energy_steps);
  Csv ecsv({"k", "energy"});
  for (std::size_t k = 0; k < energy.size(); ++k) ecsv.add(k, energy[k]);
  b.csv["energy.csv"] = ecsv.str();
  const EnergyDecay decay = energy_decay_check(g, d.op, s, x);
  b.summary["energy"] = {{"steps", c.energy_steps},
                         {"initial", energy.front()},
                         {"final", energy.back()},
                         {"one_step_bound", decay.bound},
                         {"one_step_status", to_string(decay.status)},
                         {"csv", "energy.csv"}};

  if (s.connected && !s.is_bipartite) {
    const auto res = convergence_trajectory(d.op, s, x, c.energy_steps);
    Csv rcsv({"k", "residual"});
    for (std::size_t k = 0; k < res.size(); ++k) rcsv.add(k, res[k]);
    b.csv["convergence.csv"] = rcsv.str();
    b.summary["convergence"] = {{"initial", res.front()}, {"final", res.back()}, {"csv", "convergence.csv"}};
  } else {
    notices.push_back("convergence residual skipped: graph is disconnected or bipartite");
  }
  add_notices(b, notices);
  return b;
}

// ---------------------------------------------------------------- decouple

namespace {

struct CellResult {
  int k = 0, l = 0;
  std::string trick;
  int seed_index = 0;
  bool diverged = false;
  double acc_train = NAN, acc_val = NAN, acc_test = NAN, energy = NAN, loss = NAN;
  std::string key;
  std::string epoch_csv;
  bool cached = false;
};

Json cell_json(const CellResult& r) {
  return {{"k", r.k}, {"l", r.l}, {"trick", r.trick}, {"seed_index", r.seed_index}, {"diverged", r.diverged},
          {"acc_train", num(r.acc_train)}, {"acc_val", num(r.acc_val)}, {"acc_test", num(r.acc_test)},
          {"energy", num(r.energy)}, {"loss", num(r.loss)}};
}

double opt_num(const Json& j) { return j.is_null() ? NAN : j.get<double>(); }

CellResult run_cell(const RunConfig& c, const Dataset& d, int k, int l, const std::string& trick, int si,
                    const std::filesystem::path& cache) {
  CellResult r;
  r.k = k;
  r.l = l;
  r.trick = trick;
  r.seed_index = si;
  Json key = {{"data", hex(data_hash(d))}, {"k", k}, {"l", l}, {"trick", trick}, {"seed", run_seed(c, si)},
              {"lr", c.lr}, {"epochs", c.epochs}, {"hidden", c.hidden}, {"weight_decay", c.weight_decay},
              {"keep_prob", c.keep_prob}, {"alpha", c.alpha}, {"lambda", c.lambda},
              {"dropedge_degrees", c.dropedge_degrees}};
  r.key = hex(config_hash(key));
  const auto file = cache / (r.key + ".json");
  const auto csv_file = cache / (r.key + ".csv");
  if (std::filesystem::exists(file) && std::filesystem::exists(csv_file)) {
    std::ifstream in(file);
    Json j;
    try {
      in >> j;
      if (j.at("key") == key) {
        const Json& m = j.at("result");
        r.diverged = m.at("diverged").get<bool>();
        r.acc_train = opt_num(m.at("acc_train"));
        r.acc_val = opt_num(m.at("acc_val"));
        r.acc_test = opt_num(m.at("acc_test"));
        r.energy = opt_num(m.at("energy"));
        r.loss = opt_num(m.at("loss"));
        std::ifstream cin(csv_file);
        std::stringstream ss;
        ss << cin.rdbuf();
        r.epoch_csv = ss.str();
        r.cached = true;
        return r;
      }
    } catch (const nlohmann::json::exception&) {
      // unreadable cache entry: recompute
    }
  }

  DecoupledOptions o;
  o.input_width = d.features.cols();
  o.hidden_width = c.hidden;
  o.output_width = d.num_classes;
  o.alpha = c.alpha;
  o.lambda = c.lambda;
  o.keep_prob = c.keep_prob;
  o.seed = run_seed(c, si);
  ModelSpec spec = build_decoupled_spec(k, l, parse_trick(trick), o);
  spec.dropedge_degrees = parse_dropedge_degrees(c.dropedge_degrees);

  TrainConfig tc;
  tc.learning_rate = c.lr;
  tc.epochs = c.epochs;
  tc.seed = o.seed;
  tc.weight_decay = c.weight_decay;
  tc.train_nodes = d.train;
  tc.val_nodes = d.val;
  tc.test_nodes = d.test;
  try {
    TrainResult tr = train(spec, d.op, d.features, d.targets, tc);
    const Matrix out = forward(tr.model, d.op, d.features, Mode::eval).output;
    r.acc_train = accuracy(out, d.targets, d.train);
    r.acc_val = accuracy(out, d.targets, d.val);
    r.acc_test = accuracy(out, d.targets, d.test);
    r.energy = dirichlet_energy(*d.graph, out);
    r.loss = loss_value(out, d.targets, LossKind::half_mse, d.train);
    std::ostringstream csv;
    write_epoch_csv(csv, tr.logs);
    r.epoch_csv = csv.str();
  } catch (const TrainingDiverged&) {
    r.diverged = true;
  } catch (const NumericError&) {
    r.diverged = true;
  }
  if (r.diverged) r.epoch_csv = "epoch,loss,gf,acc_train,acc_val,acc_test\n";

  std::filesystem::create_directories(cache);
  std::ofstream(file) << Json{{"key", key}, {"result", cell_json(r)}}.dump(1) << '\n';
  std::ofstream(csv_file) << r.epoch_csv;
  return r;
}

}  // namespace

ReportBundle cmd_decouple(const RunConfig& c) {
  c.validate();
  if (c.k.empty() || c.l.empty() || c.tricks.empty()) throw ContractError("decouple needs k, l and tricks");
  ReportBundle b = bundle_for(c);
  Dataset d = load_features_labels(c);
  b.summary["data"] = data_json(d);

  struct Job {
    int k, l, seed;
    std::string trick;
  };
  std::vector<Job> jobs;
  for (const auto& t : c.tricks)
    for (int k : c.k)
      for (int l : c.l)
        for (int s = 0; s < c.seeds; ++s) jobs.push_back({k, l, s, t});

  const auto cache = std::filesystem::path(c.out) / "cells";
  std::vector<CellResult> results(jobs.size());
  parallel_for(jobs.size(), c.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    results[i] = run_cell(c, d, j.k, j.l, j.trick, j.seed, cache);
  });

  Csv grid({"trick", "k", "l", "seed_index", "acc_train", "acc_val", "acc_test", "energy", "loss", "diverged"});
  Json cells = Json::array();
  int cached = 0, diverged = 0;
  for (const auto& r : results) {
    grid.add(r.trick, r.k, r.l, r.seed_index, r.acc_train, r.acc_val, r.acc_test, r.energy, r.loss, r.diverged);
    Json j = cell_json(r);
    j["csv"] = "cells/" + r.key + ".csv";
    cells.push_back(j);
    cached += r.cached;
    diverged += r.diverged;
    b.csv["cells/" + r.key + ".csv"] = r.epoch_csv;
  }
  b.csv["grid.csv"] = grid.str();
  b.summary["cells"] = cells;
  b.summary["diverged_cells"] = diverged;
  b.meta["cached_cells"] = cached;

  auto find = [&](const std::string& t, int k, int l, int s) -> const CellResult& {
    for (const auto& r : results)
      if (r.trick == t && r.k == k && r.l == l && r.seed_index == s) return r;
    throw ContractError("missing cell");
  };

  // Mean test accuracy grid: one row per K, one column per L.
  for (const auto& t : c.tricks) {
    std::vector<std::string> header{"k"};
    for (int l : c.l) header.push_back("l" + std::to_string(l));
    Csv mean(header);
    for (int k : c.k) {
      std::ostringstream row;
      row.precision(17);
      row << k;
      for (int l : c.l) {
        double acc = 0.0;
        for (int s = 0; s < c.seeds; ++s) acc += find(t, k, l, s).acc_test;
        row << ',' << acc / c.seeds;
      }
      mean.add(row.str());
    }
    b.csv["grid_" + t + ".csv"] = mean.str();
  }

  Json depth_cmp = Json::array();
  const int lmin = *std::min_element(c.l.begin(), c.l.end());
  const int lmax = *std::max_element(c.l.begin(), c.l.end());
  if (lmin != lmax) {
    for (const auto& t : c.tricks) {
      for (int k : c.k) {
        int acc_lower = 0, energy_lower = 0, undefined = 0;
        for (int s = 0; s < c.seeds; ++s) {
          const auto& shallow = find(t, k, lmin, s);
          const auto& deep = find(t, k, lmax, s);
          if (shallow.diverged || deep.diverged) {
            ++undefined;
            continue;
          }
          acc_lower += deep.acc_test < shallow.acc_test;
          energy_lower += deep.energy < shallow.energy;
        }
        depth_cmp.push_back({{"trick", t}, {"k", k}, {"l_shallow", lmin}, {"l_deep", lmax}, {"seeds", c.seeds},
                             {"acc_lower", acc_lower}, {"energy_lower", energy_lower}, {"undefined", undefined}});
      }
    }
  }
  b.summary["depth_comparison"] = depth_cmp;

  Json trick_cmp = Json::array();
  if (std::find(c.tricks.begin(), c.tricks.end(), "none") != c.tricks.end()) {
    for (const auto& t : c.tricks) {
      if (t == "none") continue;
      for (int k : c.k)
        for (int l : c.l) {
          int higher = 0, undefined = 0;
          for (int s = 0; s < c.seeds; ++s) {
            const auto& with = find(t, k, l, s);
            const auto& base = find("none", k, l, s);
            if (with.diverged || base.diverged) {
              ++undefined;
              continue;
            }
            higher += with.energy > base.energy;
          }
          trick_cmp.push_back({{"trick", t}, {"k", k}, {"l", l}, {"seeds", c.seeds}, {"energy_higher", higher},
                               {"undefined", undefined}});
        }
    }
  }
  b.summary["trick_comparison"] = trick_cmp;
  Warnings notices = d.notices;
  for (const auto& t : c.tricks) {
    DecoupledOptions probe;
    for (const auto& a : build_decoupled_spec(1, 1, parse_trick(t), probe).advisories) notices.push_back(a);
  }
  if (diverged > 0) notices.push_back(std::to_string(diverged) + " cells diverged and are reported as null");
  add_notices(b, notices);
  return b;
}

// ---------------------------------------------------------------- gradflow

namespace {

struct FlowRun {
  std::string model;
  int depth = 0;
  int seed_index = 0;
  bool diverged = false;
  double peak = 0.0;
  int peak_epoch = 0;
  double gf_min = 0.0, gf_max = 0.0;
  std::string csv;
};

FlowRun run_flow(const RunConfig& c, const Dataset& d, const std::string& model, int depth, int si) {
  FlowRun r;
  r.model = model;
  r.depth = depth;
  r.seed_index = si;
  DeepModelOptions o;
  o.input_width = d.features.cols();
  o.hidden_width = c.hidden;
  o.output_width = d.num_classes;
  o.depth = depth;
  o.seed = run_seed(c, si);
  o.alpha = c.alpha;
  o.lambda = c.lambda;
  o.omega = c.omega;
  o.keep_prob = c.keep_prob;
  ModelSpec spec = make_model(parse_model_kind(model), o);
  spec.dropedge_degrees = parse_dropedge_degrees(c.dropedge_degrees);
  for (auto& layer : spec.layers)
    if (auto* om = std::get_if<OmegaGcnLayer>(&layer)) om->learn_omega = c.learn_omega;

  TrainConfig tc;
  tc.learning_rate = c.lr;
  tc.epochs = c.epochs;
  tc.seed = o.seed;
  tc.weight_decay = c.weight_decay;
  tc.train_nodes = d.train;
  tc.val_nodes = d.val;
  tc.test_nodes = d.test;
  try {
    TrainResult tr = train(spec, d.op, d.features, d.targets, tc);
    if (tr.logs.empty()) throw ContractError("gradflow needs at least one epoch");
    const PeakFlow p = peak_gradient_flow(tr.logs);
    r.peak = p.value;
    r.peak_epoch = p.epoch;
    r.gf_min = r.gf_max = tr.logs.front().gradient_flow;
    for (const auto& l : tr.logs) {
      r.gf_min = std::min(r.gf_min, l.gradient_flow);
      r.gf_max = std::max(r.gf_max, l.gradient_flow);
    }
    std::ostringstream csv;
    write_epoch_csv(csv, tr.logs);
    r.csv = csv.str();
  } catch (const TrainingDiverged& e) {
    r.diverged = true;
    r.peak = INFINITY;
    r.peak_epoch = e.epoch();
  } catch (const NumericError&) {
    r.diverged = true;
    r.peak = INFINITY;
  }
  if (r.diverged) r.csv = "epoch,loss,gf,acc_train,acc_val,acc_test\n";
  return r;
}

double stability(const FlowRun& r) { return r.gf_min > 0.0 ? r.gf_max / r.gf_min : INFINITY; }

}  // namespace

ReportBundle cmd_gradflow(const RunConfig& c) {
  c.validate();
  if (c.models.empty() || c.depths.empty()) throw ContractError("gradflow needs models and depths");
  ReportBundle b = bundle_for(c);
  Dataset d = load_features_labels(c);
  b.summary["data"] = data_json(d);

  struct Job {
    std::string model;
    int depth, seed;
  };
  std::vector<Job> jobs;
  for (int depth : c.depths)
    for (int s = 0; s < c.seeds; ++s)
      for (const auto& m : c.models) jobs.push_back({m, depth, s});
  std::vector<FlowRun> runs(jobs.size());
  parallel_for(jobs.size(), c.jobs, [&](std::size_t i) { runs[i] = run_flow(c, d, jobs[i].model, jobs[i].depth, jobs[i].seed); });

  Csv peaks({"model", "depth", "seed_index", "peak", "peak_epoch", "gf_min", "gf_max", "stability", "diverged"});
  Json runs_json = Json::array();
  for (const auto& r : runs) {
    const std::string file = "gradflow_" + r.model + "_d" + std::to_string(r.depth) + "_s" + std::to_string(r.seed_index) + ".csv";
    b.csv[file] = r.csv;
    peaks.add(r.model, r.depth, r.seed_index, r.peak, r.peak_epoch, r.gf_min, r.gf_max, stability(r), r.diverged);
    runs_json.push_back({{"model", r.model}, {"depth", r.depth}, {"seed_index", r.seed_index},
                         {"peak", num(r.peak)}, {"peak_epoch", r.peak_epoch}, {"gf_min", r.gf_min},
                         {"gf_max", r.gf_max}, {"stability", num(stability(r))}, {"diverged", r.diverged},
                         {"csv", file}});
  }
  b.csv["peaks.csv"] = peaks.str();
  b.summary["runs"] = runs_json;

  auto find = [&](const std::string& m, int depth, int s) -> const FlowRun& {
    for (const auto& r : runs)
      if (r.model == m && r.depth == depth && r.seed_index == s) return r;
    throw ContractError("missing run");
  };

  // Ordering: peaks strictly decrease along the models list.
  Json ordering = Json::array();
  for (int depth : c.depths) {
    int holds = 0, ill_defined = 0;
    for (int s = 0; s < c.seeds; ++s) {
      bool ok = true, undefined = false;
      for (std::size_t m = 0; m + 1 < c.models.size(); ++m) {
        const auto& hi = find(c.models[m], depth, s);
        const auto& lo = find(c.models[m + 1], depth, s);
        if (std::isinf(hi.peak) && std::isinf(lo.peak)) undefined = true;
        ok = ok && hi.peak > lo.peak;
      }
      holds += ok && !undefined;
      ill_defined += undefined;
    }
    Json entry = {{"depth", depth}, {"seeds", c.seeds}, {"holds", holds}, {"ill_defined", ill_defined}};
    const bool has_ii = std::find(c.models.begin(), c.models.end(), "gcnii") != c.models.end();
    const bool has_gcn = std::find(c.models.begin(), c.models.end(), "gcn") != c.models.end();
    if (has_ii && has_gcn) {
      int stable = 0;
      for (int s = 0; s < c.seeds; ++s) stable += stability(find("gcnii", depth, s)) < stability(find("gcn", depth, s));
      entry["gcnii_more_stable"] = stable;
    }
    ordering.push_back(entry);
  }
  b.summary["ordering"] = ordering;
  b.summary["model_order"] = c.models;
  Warnings notices = d.notices;
  int diverged = 0;
  for (const auto& r : runs) diverged += r.diverged;
  if (diverged > 0) notices.push_back(std::to_string(diverged) + " runs diverged; their peaks are infinite");
  add_notices(b, notices);
  return b;
}

// ---------------------------------------------------------------- bounds

Json to_json(const BoundReport& r) {
  const BoundInputs& in = r.inputs;
  Json inputs = {{"gamma", in.gamma},           {"num_nodes", in.num_nodes},
                 {"delta", in.delta},           {"weight_norms", in.weight_norms},
                 {"feature_norms", in.feature_norms}, {"x0_norm", in.x0_norm}};
  if (in.alpha) inputs["alpha"] = *in.alpha;
  if (!in.beta.empty()) inputs["beta"] = in.beta;
  if (!in.bn_scale.empty()) inputs["bn_scale"] = in.bn_scale;
  if (!in.dropedge_delta.empty()) inputs["dropedge_delta"] = in.dropedge_delta;
  if (in.omega) inputs["omega"] = *in.omega;
  Json layers = Json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"layer", l.layer}, {"bound", l.terms.value}, {"prefactor", l.terms.prefactor},
                      {"smoothing", l.terms.smoothing}, {"training", l.terms.training},
                      {"feature", l.terms.feature}, {"empirical", l.empirical}, {"margin", l.margin}});
  }
  return {{"row", to_string(r.row)}, {"inputs", inputs}, {"layers", layers}, {"min_margin", r.min_margin},
          {"sound", r.sound()}};
}

Json instance_to_json(const BoundInstance& inst) {
  Json edges = Json::array();
  for (const auto& [i, j] : inst.graph->edges()) edges.push_back({i, j});
  Json weights = Json::array();
  for (const auto& w : inst.weights) weights.push_back(std::vector<double>(w.data(), w.data() + w.size()));
  auto col = [](const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.size()); };
  return {{"kind", to_string(inst.kind)},
          {"seed", inst.seed},
          {"num_nodes", inst.graph->num_nodes()},
          {"edges", edges},
          {"weights", weights},
          {"x0", col(inst.x0)},
          {"y", col(inst.y)},
          {"options",
           {{"alpha", inst.options.alpha},
            {"lambda", inst.options.lambda},
            {"omega", inst.options.omega},
            {"keep_prob", inst.options.keep_prob}}}};
}

BoundInstance instance_from_json(const Json& j) {
  try {
    BoundInstance inst;
    inst.kind = parse_model_kind(j.at("kind").get<std::string>());
    inst.seed = j.at("seed").get<std::uint64_t>();
    const Index v = j.at("num_nodes").get<Index>();
    std::vector<NodePair> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<Index>(), e.at(1).get<Index>());
    inst.graph = std::make_shared<const Graph>(build_graph(edges, v));
    for (const auto& w : j.at("weights")) {
      const auto vals = w.get<std::vector<double>>();
      inst.weights.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size())));
    }
    const auto x0 = j.at("x0").get<std::vector<double>>();
    const auto y = j.at("y").get<std::vector<double>>();
    if (static_cast<Index>(x0.size()) != v || static_cast<Index>(y.size()) != v) {
      throw ContractError("instance: x0 / y length != num_nodes");
    }
    inst.x0 = Eigen::Map<const Matrix>(x0.data(), v, 1);
    inst.y = Eigen::Map<const Matrix>(y.data(), v, 1);
    const Json& o = j.at("options");
    inst.options.alpha = o.at("alpha").get<double>();
    inst.options.lambda = o.at("lambda").get<double>();
    inst.options.omega = o.at("omega").get<double>();
    inst.options.keep_prob = o.at("keep_prob").get<double>();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed bound instance: ") + e.what());
  }
}

namespace {

Json factor_stats(std::vector<double> values) {
  if (values.empty()) return {{"count", 0}};
  std::sort(values.begin(), values.end());
  return {{"count", values.size()},
          {"min", values.front()},
          {"median", values[values.size() / 2]},
          {"max", values.back()}};
}

}  // namespace

ReportBundle cmd_bounds(const RunConfig& c) {
  c.validate();
  ReportBundle b = bundle_for(c);

  if (!c.replay.empty()) {
    std::ifstream in(c.replay);
    if (!in) throw ContractError("cannot open replay file " + c.replay);
    Json j;
    in >> j;
    const BoundInstance inst = instance_from_json(j);
    const BoundReport rep = verify_instance(inst);
    b.summary["replay"] = to_json(rep);
    b.exit_code = rep.sound() ? 0 : 3;
    return b;
  }

  BoundSweepConfig sc;
  if (c.depth > 0) sc.min_depth = sc.max_depth = c.depth;
  std::vector<ModelKind> kinds;
  if (c.model == "all") {
    kinds = {ModelKind::gcn, ModelKind::gcnii, ModelKind::resgcn, ModelKind::omega_gcn, ModelKind::gcn_batchnorm,
             ModelKind::gcn_dropedge};
  } else {
    kinds = {parse_model_kind(c.model)};
  }

  Json sweeps = Json::array();
  for (ModelKind kind : kinds) {
    const SweepSummary s = bound_sweep(kind, c.sweep, c.seed, sc, c.jobs);
    const std::string name = to_string(kind);
    Csv csv({"instance", "num_nodes", "depth", "layer", "bound", "prefactor", "smoothing", "training", "feature",
             "empirical", "margin"});
    std::vector<double> smoothing, training, feature;
    for (std::size_t i = 0; i < s.reports.size(); ++i) {
      const auto& r = s.reports[i];
      for (const auto& l : r.layers) {
        csv.add(i, r.inputs.num_nodes, r.inputs.depth(), l.layer, l.terms.value, l.terms.prefactor,
                l.terms.smoothing, l.terms.training, l.terms.feature, l.empirical, l.margin);
        smoothing.push_back(l.terms.smoothing);
        training.push_back(l.terms.training);
        feature.push_back(l.terms.feature);
      }
    }
    b.csv["bounds_" + name + ".csv"] = csv.str();
    Json entry = {{"model", name},
                  {"instances", s.instances},
                  {"violations", s.violations},
                  {"min_margin", num(s.min_margin)},
                  {"max_ratio", s.max_ratio},
                  {"factors",
                   {{"smoothing", factor_stats(smoothing)},
                    {"training", factor_stats(training)},
                    {"feature", factor_stats(feature)}}},
                  {"csv", "bounds_" + name + ".csv"}};
    if (s.violations > 0) {
      const std::string file = "violation_" + name + ".json";
      BoundInstance inst = random_bound_instance(kind, sc, derive_seed(c.seed, static_cast<std::uint64_t>(s.first_violation)));
      b.extra[file] = instance_to_json(inst).dump(1) + "\n";
      entry["first_violation"] = s.first_violation;
      entry["violation_file"] = file;
      b.exit_code = 3;
    }
    sweeps.push_back(entry);
  }
  b.summary["sweeps"] = sweeps;

  const OrderingSummary o = bound_ordering(c.ordering_samples, c.seed, sc);
  Csv ocsv({"sample", "depth", "delta", "resgcn", "gcn", "gcnii", "omegagcn", "res_gt_gcn_layers",
            "gcn_gt_gcnii_layers", "gcn_gt_omega_layers"});
  int layers = 0, res_layers = 0, ii_layers = 0, om_layers = 0;
  for (std::size_t i = 0; i < o.details.size(); ++i) {
    const auto& s = o.details[i];
    ocsv.add(i, s.layers, s.inputs.delta, s.resgcn, s.gcn, s.gcnii, s.omega_gcn, s.res_gt_gcn_layers,
             s.gcn_gt_gcnii_layers, s.gcn_gt_omega_layers);
    layers += s.layers;
    res_layers += s.res_gt_gcn_layers;
    ii_layers += s.gcn_gt_gcnii_layers;
    om_layers += s.gcn_gt_omega_layers;
  }
  b.csv["ordering.csv"] = ocsv.str();
  b.summary["ordering"] = {{"samples", o.samples},
                           {"res_gt_gcn", o.res_gt_gcn},
                           {"gcn_gt_gcnii", o.gcn_gt_gcnii},
                           {"gcn_gt_omegagcn", o.gcn_gt_omega},
                           {"chain_gcnii", o.chain_gcnii},
                           {"chain_omegagcn", o.chain_omega},
                           {"layers", layers},
                           {"res_gt_gcn_layers", res_layers},
                           {"gcn_gt_gcnii_layers", ii_layers},
                           {"gcn_gt_omegagcn_layers", om_layers},
                           {"csv", "ordering.csv"}};
  if (b.exit_code != 0) add_notices(b, {"negative bound margin found; offending instances serialized for replay"});
  else add_notices(b, {});
  return b;
}

ReportBundle run_command(const RunConfig& c) {
  if (c.command == "analyze") return cmd_analyze(c);
  if (c.command == "decouple") return cmd_decouple(c);
  if (c.command == "gradflow") return cmd_gradflow(c);
  if (c.command == "bounds") return cmd_bounds(c);
  throw ContractError("unknown command '" + c.command + "'");
}

// ---------------------------------------------------------------- output

namespace {

void flatten(const Json& j, const std::string& path, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
  } else if (j.is_number()) {
    out << path << ',';
    if (j.is_number_float()) {
      out << j.get<double>();
    } else {
      out << j.dump();
    }
    out << '\n';
  }
}

void write_file(const std::filesystem::path& p, const std::string& contents) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << contents;
}

}  // namespace

std::string metrics_csv(const Json& summary) {
  std::ostringstream out;
  out.precision(17);
  out << "path,value\n";
  // config values are inputs, not measurements
  Json measured = summary;
  measured.erase("config");
  flatten(measured, "", out);
  return out.str();
}

void write_bundle(const ReportBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.json", b.summary.dump(2) + "\n");
  write_file(dir / "metrics.csv", metrics_csv(b.summary));
  for (const auto& [name, text] : b.csv) write_file(dir / name, text);
  for (const auto& [name, text] : b.extra) write_file(dir / name, text);
  write_file(dir / "run_meta.json", b.meta.dump(2) + "\n");
}

}  // namespace gnnlab
