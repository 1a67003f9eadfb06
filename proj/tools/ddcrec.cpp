#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddcrec/io.h"
#include "ddcrec/pipeline.h"

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericalError = 3;

std::filesystem::path default_run_dir() {
  const char* root = std::getenv("DDCREC_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "runs") / "default";
}

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir;

  std::string input;
  std::string synthetic;
  std::optional<std::size_t> k_core;
  std::optional<std::uint64_t> seed;
  std::string rule;
  std::optional<double> k;
};

ddcrec::ExperimentConfig resolve(const CliState& s) {
  nlohmann::json j = nlohmann::json::object();
  if (!s.config_path.empty()) {
    std::ifstream in(s.config_path);
    if (!in) throw std::invalid_argument("cannot open config " + s.config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument("config " + s.config_path + ": " + e.what());
    }
  }
  if (!j.contains("output") || !j["output"].contains("run_dir")) {
    j["output"]["run_dir"] = default_run_dir().string();
  }
  for (const auto& o : s.overrides) ddcrec::apply_override(j, o);
  auto cfg = ddcrec::config_from_json(j);

  if (!s.run_dir.empty()) cfg.run_dir = s.run_dir;
  if (!s.input.empty()) {
    cfg.input = s.input;
    cfg.synthetic.reset();
  }
  if (!s.synthetic.empty()) {
    cfg.synthetic = ddcrec::parse_synthetic_spec(s.synthetic);
    cfg.input.clear();
  }
  if (s.k_core) cfg.k_core = *s.k_core;
  if (s.seed) cfg.split_seed = *s.seed;
  if (!s.rule.empty()) cfg.ddc.rule = ddcrec::UpdateRule::parse(s.rule);
  if (s.k) cfg.ddc.k = *s.k;
  if (cfg.run_dir.empty()) cfg.run_dir = default_run_dir();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative filtering with directional popularity correction"};
  app.set_version_flag("--version", std::string(ddcrec::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  CliState s;
  app.add_option("-c,--config", s.config_path, "JSON config file");
  app.add_option("--set", s.overrides, "Override a config key, e.g. --set train.learning_rate=0.01");
  app.add_option("--run-dir", s.run_dir, "Run directory (default $DDCREC_OUTPUT_ROOT/default)");

  auto* ingest = app.add_subcommand("ingest", "Load or generate interactions, filter, split");
  auto* src = ingest->add_option_group("source");
  src->add_option("--input", s.input, "TSV of user<TAB>item lines");
  src->add_option("--synthetic", s.synthetic, "users=..,items=..,zipf=..,per-user=..");
  src->require_option(0, 1);
  ingest->add_option("--k-core", s.k_core, "Minimum degree for users and items");
  ingest->add_option("--seed", s.seed, "Split seed");

  auto* train = app.add_subcommand("train", "Train the backbone with BPR");
  auto* geometry = app.add_subcommand("geometry", "Popularity direction and gradient alignment");
  auto* ddc = app.add_subcommand("ddc", "Fit per-user correction scalars");
  ddc->add_option("--rule", s.rule, "Update rule such as b_a");
  ddc->add_option("--k", s.k, "Fraction of history used for the preference direction");
  auto* evaluate = app.add_subcommand("evaluate", "Ranking metrics for baseline and corrected users");
  auto* ablate = app.add_subcommand("ablate", "Rule grid and component ablation");
  auto* sweep = app.add_subcommand("sweep-k", "Fine-tune and evaluate for each k in ddc.sweep_ks");
  auto* run = app.add_subcommand("run", "Every stage in order");
  run->add_option("--input", s.input, "TSV of user<TAB>item lines");
  run->add_option("--synthetic", s.synthetic, "users=..,items=..,zipf=..,per-user=..");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    const auto cfg = resolve(s);
    if (ingest->parsed()) ddcrec::cmd_ingest(cfg);
    if (train->parsed()) ddcrec::cmd_train(cfg);
    if (geometry->parsed()) ddcrec::cmd_geometry(cfg);
    if (ddc->parsed()) ddcrec::cmd_ddc(cfg);
    if (evaluate->parsed()) ddcrec::cmd_evaluate(cfg);
    if (ablate->parsed()) ddcrec::cmd_ablate(cfg);
    if (sweep->parsed()) ddcrec::cmd_sweep_k(cfg);
    if (run->parsed()) ddcrec::cmd_run(cfg);
  } catch (const ddcrec::DependencyError& e) {
    std::cerr << "error: dependency: " << e.what() << "\n";
    return kDataError;
  } catch (const ddcrec::DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return kDataError;
  } catch (const ddcrec::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
