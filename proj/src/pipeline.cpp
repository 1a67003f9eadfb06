#include "ddcrec/pipeline.h"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ddcrec/geometry.h"
#include "ddcrec/io.h"
#include "ddcrec/metrics.h"

namespace ddcrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

json synthetic_to_json(const SyntheticSpec& s) {
  return {{"users", s.num_users},         {"items", s.num_items},
          {"zipf", s.zipf_exponent},      {"per_user", s.interactions_per_user},
          {"seed", s.seed},               {"clusters", s.num_clusters},
          {"niche_share", s.niche_share}, {"niche_spread", s.niche_spread}};
}

SyntheticSpec synthetic_from_json(const json& j) {
  SyntheticSpec s;
  s.num_users = j.value("users", s.num_users);
  s.num_items = j.value("items", s.num_items);
  s.zipf_exponent = j.value("zipf", s.zipf_exponent);
  s.interactions_per_user = j.value("per_user", s.interactions_per_user);
  s.seed = j.value("seed", s.seed);
  s.num_clusters = j.value("clusters", s.num_clusters);
  s.niche_share = j.value("niche_share", s.niche_share);
  s.niche_spread = j.value("niche_spread", s.niche_spread);
  return s;
}

void check_keys(const json& given, const json& schema, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!schema.is_object() || !schema.contains(key)) {
      throw std::invalid_argument("unknown config key '" + here + "'");
    }
    if (here == "dataset.synthetic") {
      check_keys(value, synthetic_to_json(SyntheticSpec{}), here);
    } else if (value.is_object()) {
      check_keys(value, schema.at(key), here);
    }
  }
}

std::string to_csv_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

void echo_config(const std::string& command, const ExperimentConfig& cfg) {
  const json j = to_json(cfg);
  std::cout << "# " << command << " with resolved config:\n" << j.dump(2) << "\n";
  write_file_atomic(RunDir{cfg.run_dir}.root / "configs" / (command + ".json"), j.dump(2) + "\n");
}

FrozenModel load_frozen(const RunDir& run, const InteractionDataset& ds) {
  auto dump = read_embeddings(run.embeddings() / "final.emb");
  if (dump.users.rows() != ds.num_users() || dump.items.rows() != ds.num_items()) {
    throw DataError("embeddings/final.emb does not match the dataset");
  }
  return {std::move(dump.users), std::move(dump.items)};
}

std::string trace_csv(const TrainTrace& trace, bool timing) {
  std::ostringstream ss;
  trace.write_csv(ss, timing);
  return ss.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

json report_json(const RankingReport& r) {
  return {{"K", r.k},
          {"recall", r.recall},
          {"ndcg", r.ndcg},
          {"mrr", r.mrr},
          {"map", r.map},
          {"avgpop", r.avgpop},
          {"num_evaluated_users", r.num_evaluated_users},
          {"num_skipped_users", r.num_skipped_users}};
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = kVersion;
  j["dataset"] = {{"input", c.input},
                  {"synthetic", c.synthetic ? synthetic_to_json(*c.synthetic) : json(nullptr)},
                  {"k_core", c.k_core},
                  {"split", {{"train", c.ratios.train}, {"valid", c.ratios.valid}, {"test", c.ratios.test}}},
                  {"split_seed", c.split_seed}};
  j["backbone"] = {{"kind", to_string(c.backbone.kind)},
                   {"layers", c.backbone.num_layers},
                   {"layer_weights", c.backbone.layer_weights},
                   {"dim", c.dim},
                   {"init_scale", c.init_scale},
                   {"init_seed", c.init_seed}};
  const auto& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate}, {"l2", t.l2},
                {"batch_size", t.batch_size},       {"patience", t.patience},
                {"max_epochs", t.max_epochs},       {"seed", t.seed},
                {"optimizer", optimizer_name(t.optimizer)},
                {"beta1", t.beta1},                 {"beta2", t.beta2},
                {"eps", t.eps},                     {"eval_k", t.eval_k}};
  j["geometry"] = {{"rho", c.rho},
                   {"alignment_samples", c.alignment_samples},
                   {"alignment_seed", c.alignment_seed}};
  const auto& d = c.ddc;
  j["ddc"] = {{"rule", d.rule.name()},        {"k", d.k},
              {"learning_rate", d.learning_rate}, {"init_scale", d.init_scale},
              {"batch_size", d.batch_size},   {"patience", d.patience},
              {"max_epochs", d.max_epochs},   {"seed", d.seed},
              {"optimizer", optimizer_name(d.optimizer)},
              {"sweep_ks", c.sweep_ks}};
  j["eval"] = {{"ks", c.eval_ks}, {"l_eval_seed", c.l_eval_seed}};
  j["output"] = {{"run_dir", c.run_dir.string()}, {"record_timing", c.record_timing}};
  return j;
}

ExperimentConfig config_from_json(const json& given) {
  ExperimentConfig defaults;
  json j = to_json(defaults);
  check_keys(given, j, "");
  j.merge_patch(given);
  ExperimentConfig c;
  try {
    const auto& ds = j.at("dataset");
    c.input = ds.at("input").get<std::string>();
    if (ds.contains("synthetic") && ds.at("synthetic").is_object()) {
      c.synthetic = synthetic_from_json(ds.at("synthetic"));
    }
    c.k_core = ds.at("k_core").get<std::size_t>();
    c.ratios = {ds.at("split").at("train").get<double>(), ds.at("split").at("valid").get<double>(),
                ds.at("split").at("test").get<double>()};
    c.split_seed = ds.at("split_seed").get<std::uint64_t>();

    const auto& bb = j.at("backbone");
    c.backbone.kind = parse_backbone(bb.at("kind").get<std::string>());
    c.backbone.num_layers = bb.at("layers").get<std::size_t>();
    c.backbone.layer_weights = bb.at("layer_weights").get<std::vector<double>>();
    c.backbone.resolved_weights();
    c.dim = bb.at("dim").get<std::size_t>();
    c.init_scale = bb.at("init_scale").get<double>();
    c.init_seed = bb.at("init_seed").get<std::uint64_t>();

    const auto& t = j.at("train");
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.l2 = t.at("l2").get<double>();
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.patience = t.at("patience").get<std::size_t>();
    c.train.max_epochs = t.at("max_epochs").get<std::size_t>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.optimizer = parse_optimizer(t.at("optimizer").get<std::string>());
    c.train.beta1 = t.at("beta1").get<double>();
    c.train.beta2 = t.at("beta2").get<double>();
    c.train.eps = t.at("eps").get<double>();
    c.train.eval_k = t.at("eval_k").get<std::size_t>();
    c.train.validate();

    const auto& g = j.at("geometry");
    c.rho = g.at("rho").get<double>();
    c.alignment_samples = g.at("alignment_samples").get<std::size_t>();
    c.alignment_seed = g.at("alignment_seed").get<std::uint64_t>();

    const auto& d = j.at("ddc");
    c.ddc.rule = UpdateRule::parse(d.at("rule").get<std::string>());
    c.ddc.k = d.at("k").get<double>();
    c.ddc.rho = c.rho;
    c.ddc.learning_rate = d.at("learning_rate").get<double>();
    c.ddc.init_scale = d.at("init_scale").get<double>();
    c.ddc.batch_size = d.at("batch_size").get<std::size_t>();
    c.ddc.patience = d.at("patience").get<std::size_t>();
    c.ddc.max_epochs = d.at("max_epochs").get<std::size_t>();
    c.ddc.seed = d.at("seed").get<std::uint64_t>();
    c.ddc.optimizer = parse_optimizer(d.at("optimizer").get<std::string>());
    c.sweep_ks = d.at("sweep_ks").get<std::vector<double>>();

    c.eval_ks = j.at("eval").at("ks").get<std::vector<std::size_t>>();
    c.l_eval_seed = j.at("eval").at("l_eval_seed").get<std::uint64_t>();
    c.run_dir = j.at("output").at("run_dir").get<std::string>();
    c.record_timing = j.at("output").at("record_timing").get<bool>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config: ") + e.what());
  }
  if (c.eval_ks.empty()) throw std::invalid_argument("eval.ks must not be empty");
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must be key=value: " + assignment);
  }
  std::string pointer = "/" + assignment.substr(0, eq);
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  j[json::json_pointer(pointer)] = value;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec s;
  std::istringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad synthetic field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    try {
      if (key == "users") {
        s.num_users = std::stoul(val);
      } else if (key == "items") {
        s.num_items = std::stoul(val);
      } else if (key == "zipf") {
        s.zipf_exponent = std::stod(val);
      } else if (key == "per-user" || key == "per_user") {
        s.interactions_per_user = std::stoul(val);
      } else if (key == "seed") {
        s.seed = std::stoull(val);
      } else if (key == "clusters") {
        s.num_clusters = std::stoul(val);
      } else if (key == "niche") {
        s.niche_share = std::stod(val);
      } else if (key == "spread") {
        s.niche_spread = std::stod(val);
      } else {
        throw std::invalid_argument("unknown synthetic field '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const std::invalid_argument*>(&e) &&
          std::string(e.what()).starts_with("unknown")) {
        throw;
      }
      throw std::invalid_argument("bad value for synthetic field '" + key + "'");
    }
  }
  return s;
}

InteractionDataset load_run_dataset(const RunDir& run) {
  json manifest;
  try {
    manifest = json::parse(read_file(run.manifest()));
  } catch (const json::parse_error& e) {
    throw DataError("corrupt manifest: " + std::string(e.what()));
  }
  return InteractionDataset(manifest.at("num_users").get<std::size_t>(),
                            manifest.at("num_items").get<std::size_t>(),
                            parse_split_tsv(run.splits() / "train.tsv"),
                            parse_split_tsv(run.splits() / "valid.tsv"),
                            parse_split_tsv(run.splits() / "test.tsv"));
}

void cmd_ingest(const ExperimentConfig& cfg) {
  echo_config("ingest", cfg);
  const RunDir run{cfg.run_dir};
  UnsplitDataset raw;
  std::string source;
  if (!cfg.input.empty()) {
    raw = load_interactions(cfg.input);
    source = cfg.input;
  } else if (cfg.synthetic) {
    raw = generate_synthetic(*cfg.synthetic);
    source = "synthetic";
  } else {
    throw std::invalid_argument("ingest needs an input file or a synthetic spec");
  }
  const UnsplitDataset filtered = cfg.k_core > 1 ? k_core_filter(raw, cfg.k_core) : raw;
  const InteractionDataset ds = split(filtered, cfg.ratios, cfg.split_seed);

  write_file_atomic(run.splits() / "train.tsv", format_split_tsv(ds.train()));
  write_file_atomic(run.splits() / "valid.tsv", format_split_tsv(ds.valid()));
  write_file_atomic(run.splits() / "test.tsv", format_split_tsv(ds.test()));
  auto id_table = [](const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t k = 0; k < ids.size(); ++k) out += std::to_string(k) + "\t" + ids[k] + "\n";
    return out;
  };
  write_file_atomic(run.splits() / "users.tsv", id_table(ds.user_ids));
  write_file_atomic(run.splits() / "items.tsv", id_table(ds.item_ids));

  const json manifest = {
      {"version", kVersion},
      {"source", source},
      {"raw_users", raw.num_users},
      {"raw_items", raw.num_items},
      {"raw_interactions", raw.interactions.size()},
      {"k_core", cfg.k_core},
      {"num_users", ds.num_users()},
      {"num_items", ds.num_items()},
      {"num_train", ds.train().size()},
      {"num_valid", ds.valid().size()},
      {"num_test", ds.test().size()},
      {"ratios", {cfg.ratios.train, cfg.ratios.valid, cfg.ratios.test}},
      {"seed", cfg.split_seed}};
  write_file_atomic(run.manifest(), manifest.dump(2) + "\n");
  write_file_atomic(run.config(), to_json(cfg).dump(2) + "\n");
  std::cout << manifest.dump(2) << "\n";
}

void cmd_train(const ExperimentConfig& cfg) {
  echo_config("train", cfg);
  const RunDir run{cfg.run_dir};
  const auto ds = load_run_dataset(run);
  auto init = init_embeddings(ds.num_users(), ds.num_items(), cfg.dim, cfg.init_seed, cfg.init_scale);
  const auto result = train(ds, cfg.backbone, cfg.train, std::move(init));

  const std::string bb = to_string(cfg.backbone.kind);
  write_embeddings(run.embeddings() / "backbone.emb",
                   {ds.num_users(), ds.num_items(), cfg.dim, bb, cfg.init_seed},
                   result.table0.users, result.table0.items);
  write_embeddings(run.embeddings() / "final.emb",
                   {ds.num_users(), ds.num_items(), cfg.dim, bb, cfg.init_seed},
                   result.final_table.users, result.final_table.items);
  write_file_atomic(run.traces() / "train.csv", trace_csv(result.trace, cfg.record_timing));
  const auto& best = result.trace.records[result.trace.best_epoch];
  const json summary = {{"backbone", bb},
                        {"epochs", result.trace.records.size()},
                        {"best_epoch", best.epoch},
                        {"best_val_mrr10", best.val_mrr10},
                        {"best_epoch_loss", best.loss}};
  write_file_atomic(run.reports() / "train.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
}

void cmd_geometry(const ExperimentConfig& cfg) {
  echo_config("geometry", cfg);
  const RunDir run{cfg.run_dir};
  const auto ds = load_run_dataset(run);
  const auto frozen = load_frozen(run, ds);
  const auto e_pop = popularity_direction(frozen.items, ds.pop(), cfg.rho);
  auto report = projection_correlation(frozen.items, ds.pop(), e_pop);
  const auto ht = head_tail_split(ds.pop(), cfg.rho);
  report.rho = cfg.rho;
  report.head_size = ht.head.size();
  report.tail_size = ht.tail.size();

  const EmbeddingTable table{frozen.users, frozen.items};
  std::ostringstream align_csv;
  align_csv << "user_id,cosine\n" << std::setprecision(10);
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    std::optional<double> c;
    try {
      c = gradient_alignment(static_cast<Index>(u), ds, table,
                             {cfg.alignment_samples, cfg.alignment_seed});
    } catch (const NumericalError&) {
      c.reset();
    }
    report.alignment.push_back(c);
    align_csv << u << ',';
    if (c) {
      sum += *c;
      ++defined;
      align_csv << *c;
    }
    align_csv << '\n';
  }

  std::ostringstream csv;
  report.write_csv(csv, ds.pop());
  write_file_atomic(run.reports() / "geometry.csv", csv.str());
  write_file_atomic(run.reports() / "alignment.csv", align_csv.str());

  const auto axis = orthogonal_principal_axis(frozen.items, e_pop.values());
  std::ostringstream scatter;
  scatter << "item_id,pop,x,y\n" << std::setprecision(10);
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    scatter << i << ',' << ds.pop()[i] << ',' << report.projections[i] << ','
            << dot(frozen.items.row(i), axis) << '\n';
  }
  write_file_atomic(run.reports() / "geometry_2d.csv", scatter.str());

  const json summary = {{"pearson_r", report.pearson_r},
                        {"rho", report.rho},
                        {"head_size", report.head_size},
                        {"tail_size", report.tail_size},
                        {"mean_alignment", defined ? sum / static_cast<double>(defined) : 0.0},
                        {"alignment_users", defined}};
  write_file_atomic(run.reports() / "geometry.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
}

void cmd_ddc(const ExperimentConfig& cfg) {
  echo_config("ddc", cfg);
  const RunDir run{cfg.run_dir};
  const auto ds = load_run_dataset(run);
  const auto frozen = load_frozen(run, ds);
  const auto users_before = checksum(frozen.users);
  const auto items_before = checksum(frozen.items);

  auto fcfg = cfg.ddc;
  fcfg.rho = cfg.rho;
  const auto dirs = build_directions(frozen, ds, cfg.rho, fcfg.k);
  const auto result = finetune(ds, frozen, dirs, fcfg);
  const Matrix corrected = compose_final(frozen, result.params);

  std::ostringstream params_csv;
  write_params_csv(params_csv, result.params);
  write_file_atomic(run.reports() / "ddc_params.csv", params_csv.str());
  Matrix pop_row(1, dirs.pop.size());
  std::copy(dirs.pop.begin(), dirs.pop.end(), pop_row.row(0).begin());
  write_embeddings(run.embeddings() / "directions.emb",
                   {ds.num_users(), 1, frozen.items.cols(), "directions", fcfg.seed}, dirs.pref,
                   pop_row);
  write_embeddings(run.embeddings() / "ddc_final.emb",
                   {ds.num_users(), ds.num_items(), frozen.items.cols(), "ddc", fcfg.seed},
                   corrected, frozen.items);
  write_file_atomic(run.traces() / "ddc.csv", trace_csv(result.trace, cfg.record_timing));

  const double base_loss = eval_bpr_loss(frozen.users, frozen.items, ds, cfg.l_eval_seed);
  const double ddc_loss_value = eval_bpr_loss(corrected, frozen.items, ds, cfg.l_eval_seed);
  const auto& best = result.trace.records[result.trace.best_epoch];
  const json summary = {
      {"rule", fcfg.rule.name()},
      {"k", fcfg.k},
      {"epochs", result.trace.records.size()},
      {"best_epoch", best.epoch},
      {"best_val_mrr10", best.val_mrr10},
      {"median_alpha", median(result.params.alpha)},
      {"median_beta", median(result.params.beta)},
      {"l_eval_baseline", base_loss},
      {"l_eval_ddc", ddc_loss_value},
      {"frozen_unchanged",
       checksum(frozen.users) == users_before && checksum(frozen.items) == items_before}};
  write_file_atomic(run.reports() / "ddc.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
}

void cmd_evaluate(const ExperimentConfig& cfg) {
  echo_config("evaluate", cfg);
  const RunDir run{cfg.run_dir};
  const auto ds = load_run_dataset(run);
  const auto frozen = load_frozen(run, ds);
  std::vector<std::pair<std::string, Matrix>> models;
  models.emplace_back("baseline", frozen.users);
  if (fs::exists(run.embeddings() / "ddc_final.emb")) {
    auto dump = read_embeddings(run.embeddings() / "ddc_final.emb");
    models.emplace_back("ddc", std::move(dump.users));
  }
  std::ostringstream csv;
  csv << "run_id,split,K,recall,ndcg,mrr,map,avgpop,users\n";
  json all = json::object();
  for (const auto& [name, users] : models) {
    for (EvalSplit split : {EvalSplit::Valid, EvalSplit::Test}) {
      const auto reports = evaluate(users, frozen.items, ds, split, cfg.eval_ks);
      json arr = json::array();
      for (const auto& r : reports) {
        csv << name << ',' << to_string(split) << ',' << r.k << ',' << to_csv_number(r.recall)
            << ',' << to_csv_number(r.ndcg) << ',' << to_csv_number(r.mrr) << ','
            << to_csv_number(r.map) << ',' << to_csv_number(r.avgpop) << ','
            << r.num_evaluated_users << '\n';
        arr.push_back(report_json(r));
      }
      write_file_atomic(run.reports() / ("ranking_" + name + "_" + to_string(split) + ".json"),
                        arr.dump(2) + "\n");
      all[name][to_string(split)] = arr;
    }
  }
  write_file_atomic(run.reports() / "ranking.csv", csv.str());
  std::cout << csv.str();
}

void cmd_ablate(const ExperimentConfig& cfg) {
  echo_config("ablate", cfg);
  const RunDir run{cfg.run_dir};
  const auto ds = load_run_dataset(run);
  const auto frozen = load_frozen(run, ds);
  auto fcfg = cfg.ddc;
  fcfg.rho = cfg.rho;
  const auto dirs = build_directions(frozen, ds, cfg.rho, fcfg.k);
  const auto rows = run_ablation_grid(ds, frozen, dirs, fcfg, cfg.l_eval_seed, 10);
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  write_file_atomic(run.reports() / "ablation.csv", csv.str());
  std::cout << csv.str();
}

void cmd_sweep_k(const ExperimentConfig& cfg) {
  echo_config("sweep-k", cfg);
  const RunDir run{cfg.run_dir};
  const auto ds = load_run_dataset(run);
  const auto frozen = load_frozen(run, ds);
  std::ostringstream csv;
  csv << "k,mrr10,avgpop10\n";
  for (double k : cfg.sweep_ks) {
    auto fcfg = cfg.ddc;
    fcfg.k = k;
    fcfg.rho = cfg.rho;
    const auto dirs = build_directions(frozen, ds, cfg.rho, k);
    const auto result = finetune(ds, frozen, dirs, fcfg);
    const auto r =
        evaluate(compose_final(frozen, result.params), frozen.items, ds, EvalSplit::Test, 10);
    csv << to_csv_number(k) << ',' << to_csv_number(r.mrr) << ',' << to_csv_number(r.avgpop)
        << '\n';
  }
  write_file_atomic(run.reports() / "sweep_k.csv", csv.str());
  std::cout << csv.str();
}

void cmd_run(const ExperimentConfig& cfg) {
  cmd_ingest(cfg);
  cmd_train(cfg);
  cmd_geometry(cfg);
  cmd_ddc(cfg);
  cmd_evaluate(cfg);
  cmd_ablate(cfg);
  cmd_sweep_k(cfg);
}

}  // namespace ddcrec
