#include <cstring>
#include <iostream>

#include <CLI11.hpp>

#include "gnnlab/error.hpp"
#include "gnnlab/experiments.hpp"

using namespace gnnlab;

namespace {

// --config is read before the real parse so every other flag can override it.
std::string find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return argv[i] + 9;
  }
  return {};
}

void common_flags(CLI::App* sub, RunConfig& c, std::string& config_path) {
  auto* src = sub->add_option_group("graph source");
  // a source given on the command line replaces the one from the config file
  src->add_option("--edges", c.edges, "edge list file")->each([&c](const std::string&) { c.synthetic.clear(); });
  src->add_option("--synthetic", c.synthetic, "complete:N | ring:N | path:N | bipartite:A,B | sbm[:S1,..:PIN:POUT]")
      ->each([&c](const std::string&) { c.edges.clear(); });
  src->require_option(0, 1);
  sub->add_option("--features", c.features, "feature CSV, one row per node");
  sub->add_option("--labels", c.labels, "label CSV, one class id per node");
  sub->add_option("--seed", c.seed);
  sub->add_option("--jobs", c.jobs)->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--config", config_path, "JSON file mirroring these flags");
  sub->add_option("--feature-width", c.feature_width);
  sub->add_option("--feature-shift", c.feature_shift);
  sub->add_option("--energy-steps", c.energy_steps);
}

void training_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--epochs", c.epochs);
  sub->add_option("--lr", c.lr);
  sub->add_option("--weight-decay", c.weight_decay);
  sub->add_option("--hidden", c.hidden);
  sub->add_option("--seeds", c.seeds, "number of run seeds");
  sub->add_option("--train-per-class", c.train_per_class);
  sub->add_option("--val-size", c.val_size);
  sub->add_option("--test-size", c.test_size);
  sub->add_option("--dropedge-degrees", c.dropedge_degrees)->check(CLI::IsMember({"resampled", "frozen"}));
  sub->add_option("--keep-prob", c.keep_prob);
  sub->add_flag("--learn-omega,!--fixed-omega", c.learn_omega);
  sub->add_option("--alpha", c.alpha);
  sub->add_option("--lambda", c.lambda);
  sub->add_option("--omega", c.omega);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  const std::string pre = find_config(argc, argv);
  try {
    if (!pre.empty()) cfg = load_config_file(pre);
  } catch (const Error& e) {
    std::cerr << "gnnlab: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"gnnlab: smoothing and trainability diagnostics for deep GCNs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;

  auto* analyze = app.add_subcommand("analyze", "spectral summary, mixing times, energy decay");
  common_flags(analyze, cfg, config_path);
  analyze->add_option("--epsilons", cfg.epsilons)->delimiter(',');

  auto* decouple = app.add_subcommand("decouple", "SGC-MLP grid over propagation and MLP depth");
  common_flags(decouple, cfg, config_path);
  training_flags(decouple, cfg);
  decouple->add_option("--k", cfg.k)->delimiter(',');
  decouple->add_option("--l", cfg.l)->delimiter(',');
  decouple->add_option("--tricks", cfg.tricks)->delimiter(',');

  auto* gradflow = app.add_subcommand("gradflow", "gradient flow of deep models during training");
  common_flags(gradflow, cfg, config_path);
  training_flags(gradflow, cfg);
  gradflow->add_option("--models", cfg.models)->delimiter(',');
  gradflow->add_option("--depths", cfg.depths)->delimiter(',');

  auto* bounds = app.add_subcommand("bounds", "node-wise gradient bound verification");
  common_flags(bounds, cfg, config_path);
  bounds->add_option("--model", cfg.model, "model name or 'all'");
  bounds->add_option("--depth", cfg.depth, "fixed depth (0: random 1..16)");
  bounds->add_option("--sweep", cfg.sweep, "instances per model");
  bounds->add_option("--ordering-samples", cfg.ordering_samples);
  bounds->add_option("--replay", cfg.replay, "re-verify a serialized instance");

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : {analyze, decouple, gradflow, bounds}) {
    if (sub->parsed()) cfg.command = sub->get_name();
  }

  try {
    const ReportBundle bundle = run_command(cfg);
    write_bundle(bundle, cfg.out);
    Json brief = bundle.summary;
    brief.erase("config");
    std::cout << brief.dump(2) << "\nwrote " << (std::filesystem::path(cfg.out) / "summary.json").string() << '\n';
    return bundle.exit_code;
  } catch (const ContractError& e) {
    std::cerr << "gnnlab: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gnnlab: " << e.what() << '\n';
    return 1;
  }
}
