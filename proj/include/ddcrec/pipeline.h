#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddcrec/dataset.h"
#include "ddcrec/ddc.h"
#include "ddcrec/model.h"
#include "ddcrec/trainer.h"

namespace ddcrec {

inline constexpr const char* kVersion = "0.3.0";

struct ExperimentConfig {
  // dataset
  std::string input;  // TSV path; empty when synthetic
  std::optional<SyntheticSpec> synthetic;
  std::size_t k_core = 10;
  SplitRatios ratios;
  std::uint64_t split_seed = 2024;

  // backbone
  BackboneConfig backbone;
  std::size_t dim = 64;
  double init_scale = 0.1;
  std::uint64_t init_seed = 2024;

  TrainConfig train;

  // geometry
  double rho = 0.05;
  std::size_t alignment_samples = 2000;
  std::uint64_t alignment_seed = 17;

  FinetuneConfig ddc;
  std::vector<double> sweep_ks = {0.1, 0.3, 0.5, 0.7, 1.0};

  std::vector<std::size_t> eval_ks = {10, 20};
  std::uint64_t l_eval_seed = 99;
  // Wall-clock seconds in trace CSVs; off keeps every CSV byte-reproducible.
  bool record_timing = false;

  std::filesystem::path run_dir;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
// `key.path=value`; value parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);
// "users=500,items=300,zipf=1.2,per-user=40[,clusters=..,niche=..,spread=..,seed=..]"
SyntheticSpec parse_synthetic_spec(const std::string& text);

// Run directory layout.
struct RunDir {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path splits() const { return root / "splits"; }
  std::filesystem::path embeddings() const { return root / "embeddings"; }
  std::filesystem::path traces() const { return root / "traces"; }
  std::filesystem::path reports() const { return root / "reports"; }
};

// Loads the split dataset written by cmd_ingest.
InteractionDataset load_run_dataset(const RunDir& run);

void cmd_ingest(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_geometry(const ExperimentConfig& cfg);
void cmd_ddc(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg);
void cmd_ablate(const ExperimentConfig& cfg);
void cmd_sweep_k(const ExperimentConfig& cfg);
// ingest, train, geometry, ddc, evaluate, ablate, sweep-k.
void cmd_run(const ExperimentConfig& cfg);

}  // namespace ddcrec
