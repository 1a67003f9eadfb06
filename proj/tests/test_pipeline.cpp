#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ddcrec/io.h"
#include "ddcrec/pipeline.h"

using namespace ddcrec;
namespace fs = std::filesystem;

namespace {

class QuietCout {
 public:
  QuietCout() : old_(std::cout.rdbuf(sink_.rdbuf())) {}
  ~QuietCout() { std::cout.rdbuf(old_); }

 private:
  std::ostringstream sink_;
  std::streambuf* old_;
};

ExperimentConfig small_config(const fs::path& dir) {
  ExperimentConfig c;
  SyntheticSpec s;
  s.num_users = 80;
  s.num_items = 60;
  s.interactions_per_user = 12;
  s.seed = 3;
  c.synthetic = s;
  c.k_core = 3;
  c.dim = 8;
  c.train.max_epochs = 6;
  c.train.batch_size = 256;
  c.ddc.max_epochs = 4;
  c.alignment_samples = 200;
  c.run_dir = dir;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ddcrec_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel.starts_with("configs") || rel == "config.json") continue;
    out[rel] = read_file(e.path());
  }
  return out;
}

}  // namespace

TEST(Config, RoundTripsThroughJson) {
  ExperimentConfig c = small_config("/tmp/x");
  c.backbone = BackboneConfig::lightgcn(3);
  c.ddc.rule = UpdateRule::parse("ab_a");
  c.eval_ks = {5, 10, 50};
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(to_json(back), j);
}

TEST(Config, MissingKeysKeepDefaults) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.k_core, 10u);
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.ddc.rule.name(), "b_a");
  EXPECT_EQ(c.ddc.k, 0.3);
  EXPECT_EQ(c.rho, 0.05);
  EXPECT_FALSE(c.synthetic.has_value());
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_json({{"trian", {{"l2", 0.1}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"train", {{"lr", 0.1}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"dataset", {{"synthetic", {{"userz", 3}}}}}}),
               std::invalid_argument);
}

TEST(Config, OverridesParseJsonValues) {
  nlohmann::json j = nlohmann::json::object();
  apply_override(j, "train.learning_rate=0.01");
  apply_override(j, "ddc.rule=a_b");
  apply_override(j, "eval.ks=[1,2]");
  apply_override(j, "output.record_timing=true");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.ddc.rule.name(), "a_b");
  EXPECT_EQ(c.eval_ks, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(c.record_timing);
  EXPECT_THROW(apply_override(j, "novalue"), std::invalid_argument);
}

TEST(Config, SyntheticSpecString) {
  const auto s = parse_synthetic_spec("users=500,items=300,zipf=1.2,per-user=40");
  EXPECT_EQ(s.num_users, 500u);
  EXPECT_EQ(s.num_items, 300u);
  EXPECT_EQ(s.zipf_exponent, 1.2);
  EXPECT_EQ(s.interactions_per_user, 40u);
  EXPECT_THROW(parse_synthetic_spec("users=five"), std::invalid_argument);
  EXPECT_THROW(parse_synthetic_spec("colour=red"), std::invalid_argument);
}

TEST(Pipeline, MissingUpstreamArtifactIsDependencyError) {
  QuietCout quiet;
  const auto dir = fresh_dir("missing");
  const auto cfg = small_config(dir);
  EXPECT_THROW(cmd_train(cfg), DependencyError);
  cmd_ingest(cfg);
  EXPECT_THROW(cmd_geometry(cfg), DependencyError);
  EXPECT_THROW(cmd_ddc(cfg), DependencyError);
  EXPECT_THROW(cmd_evaluate(cfg), DependencyError);
  fs::remove_all(dir);
}

TEST(Pipeline, FullRunLeavesExpectedArtifacts) {
  QuietCout quiet;
  const auto dir = fresh_dir("full");
  cmd_run(small_config(dir));
  for (const char* rel :
       {"manifest.json", "config.json", "splits/train.tsv", "splits/valid.tsv", "splits/test.tsv",
        "embeddings/final.emb", "embeddings/backbone.emb", "embeddings/ddc_final.emb",
        "embeddings/directions.emb", "traces/train.csv", "traces/ddc.csv",
        "reports/geometry.csv", "reports/geometry.json", "reports/ddc_params.csv",
        "reports/ranking.csv", "reports/ablation.csv", "reports/sweep_k.csv"}) {
    EXPECT_TRUE(fs::exists(dir / rel)) << rel;
  }
  const auto sweep = read_file(dir / "reports/sweep_k.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 6);
  EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "k,mrr10,avgpop10");
  const auto ranking = read_file(dir / "reports/ranking.csv");
  EXPECT_EQ(ranking.substr(0, ranking.find('\n')), "run_id,split,K,recall,ndcg,mrr,map,avgpop,users");
  // baseline and ddc, two splits, two cutoffs.
  EXPECT_EQ(std::count(ranking.begin(), ranking.end(), '\n'), 9);
  const auto geo = nlohmann::json::parse(read_file(dir / "reports/geometry.json"));
  for (const char* key : {"pearson_r", "rho", "head_size", "tail_size"}) EXPECT_TRUE(geo.contains(key));
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("k_core"), 3);
  const auto cfg_back = config_from_json(nlohmann::json::parse(read_file(dir / "config.json")));
  EXPECT_EQ(to_json(cfg_back), to_json(small_config(dir)));
  fs::remove_all(dir);
}

TEST(Pipeline, RerunsAreByteIdentical) {
  QuietCout quiet;
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  cmd_run(small_config(a));
  const auto first = artifacts(a);
  cmd_run(small_config(a));
  EXPECT_EQ(artifacts(a), first);
  cmd_run(small_config(b));
  EXPECT_EQ(artifacts(b), first);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, ExistingInputFileIngests) {
  QuietCout quiet;
  const auto dir = fresh_dir("tsv");
  fs::create_directories(dir);
  {
    std::ofstream raw(dir / "raw.tsv");
    for (int u = 0; u < 12; ++u)
      for (int i = 0; i < 12; ++i)
        if ((u + i) % 3 != 0) raw << "user" << u << "\titem" << i << "\n";
  }
  auto cfg = small_config(dir);
  cfg.synthetic.reset();
  cfg.input = (dir / "raw.tsv").string();
  cfg.k_core = 5;
  cfg.split_seed = 7;
  cmd_ingest(cfg);
  const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(m.at("raw_interactions"), 96);
  EXPECT_EQ(m.at("num_users"), 12);
  EXPECT_EQ(m.at("seed"), 7);
  const auto users = read_file(dir / "splits/users.tsv");
  EXPECT_EQ(users.substr(0, users.find('\n')), "0\tuser0");
  fs::remove_all(dir);
}
