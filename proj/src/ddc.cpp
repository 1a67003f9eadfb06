#include "ddcrec/ddc.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "ddcrec/geometry.h"

namespace ddcrec {

namespace {

std::uint8_t parse_term(const std::string& s) {
  if (s == "a") return kAlpha;
  if (s == "b") return kBeta;
  if (s == "ab" || s == "ba") return kBoth;
  if (s.empty() || s == "none") return kNone;
  throw std::invalid_argument("unknown correction term '" + s + "'");
}

std::string term_name(std::uint8_t t) {
  switch (t) {
    case kAlpha: return "a";
    case kBeta: return "b";
    case kBoth: return "ab";
    default: return "none";
  }
}

void apply_term(std::uint8_t term, double alpha, double beta, std::span<const double> pop,
                std::span<const double> pref, std::span<double> out) {
  if (term & kAlpha) axpy(alpha, pop, out);
  if (term & kBeta) axpy(beta, pref, out);
}

}  // namespace

UpdateRule UpdateRule::parse(const std::string& name) {
  const auto sep = name.find('_');
  if (sep == std::string::npos) throw std::invalid_argument("rule must look like pos_neg: " + name);
  UpdateRule r{parse_term(name.substr(0, sep)), parse_term(name.substr(sep + 1))};
  if (r.pos == kNone && r.neg == kNone) {
    throw std::invalid_argument("a rule must apply at least one correction");
  }
  return r;
}

std::vector<UpdateRule> UpdateRule::grid() {
  std::vector<UpdateRule> out;
  for (std::uint8_t pos : {kAlpha, kBeta, kBoth}) {
    for (std::uint8_t neg : {kAlpha, kBeta, kBoth}) out.push_back({pos, neg});
  }
  return out;
}

std::string UpdateRule::name() const { return term_name(pos) + "_" + term_name(neg); }

DdcDirections build_directions(const FrozenModel& frozen, const InteractionDataset& ds,
                               double rho, double k) {
  DdcDirections dirs;
  const auto e_pop = popularity_direction(frozen.items, ds.pop(), rho);
  dirs.pop.assign(e_pop.values().begin(), e_pop.values().end());
  dirs.pref = Matrix(ds.num_users(), frozen.items.cols());
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto& hist = ds.user_hist(static_cast<Index>(u));
    if (hist.empty()) continue;
    const auto pref = preference_direction(frozen.users.row(u), hist, frozen.items, k);
    std::copy(pref.values().begin(), pref.values().end(), dirs.pref.row(u).begin());
  }
  return dirs;
}

EffectiveUserEmbeddings effective_embeddings(const FrozenModel& frozen, const DdcParams& params,
                                             Index u, const UpdateRule& rule) {
  const auto eu = frozen.users.row(u);
  EffectiveUserEmbeddings e{{eu.begin(), eu.end()}, {eu.begin(), eu.end()}};
  const auto pref = params.dirs.pref.row(u);
  apply_term(rule.pos, params.alpha[u], params.beta[u], params.dirs.pop, pref, e.pos_term);
  apply_term(rule.neg, params.alpha[u], params.beta[u], params.dirs.pop, pref, e.neg_term);
  return e;
}

double ddc_margin(const FrozenModel& frozen, const DdcParams& params, const Triplet& t,
                  const UpdateRule& rule) {
  // Expanded form of pos_term.e_i - neg_term.e_j; avoids building the vectors.
  const auto eu = frozen.users.row(t.u);
  const auto ei = frozen.items.row(t.i);
  const auto ej = frozen.items.row(t.j);
  const auto pref = params.dirs.pref.row(t.u);
  const double a = params.alpha[t.u];
  const double b = params.beta[t.u];
  double m = dot(eu, ei) - dot(eu, ej);
  if (rule.pos & kAlpha) m += a * dot(params.dirs.pop, ei);
  if (rule.pos & kBeta) m += b * dot(pref, ei);
  if (rule.neg & kAlpha) m -= a * dot(params.dirs.pop, ej);
  if (rule.neg & kBeta) m -= b * dot(pref, ej);
  return m;
}

double ddc_loss(const FrozenModel& frozen, const DdcParams& params, const Triplet& t,
                const UpdateRule& rule) {
  return bpr_loss(ddc_margin(frozen, params, t, rule));
}

ScalarGradient ddc_gradients(const FrozenModel& frozen, const DdcParams& params,
                             const Triplet& t, const UpdateRule& rule) {
  const auto ei = frozen.items.row(t.i);
  const auto ej = frozen.items.row(t.j);
  const auto pref = params.dirs.pref.row(t.u);
  const double margin = ddc_margin(frozen, params, t, rule);
  const double w = sigmoid(-margin);
  double dm_da = 0.0;
  double dm_db = 0.0;
  if (rule.pos & kAlpha) dm_da += dot(params.dirs.pop, ei);
  if (rule.neg & kAlpha) dm_da -= dot(params.dirs.pop, ej);
  if (rule.pos & kBeta) dm_db += dot(pref, ei);
  if (rule.neg & kBeta) dm_db -= dot(pref, ej);
  return {-w * dm_da, -w * dm_db, bpr_loss(margin)};
}

Matrix compose_final(const FrozenModel& frozen, const DdcParams& params, CompositionMask mask) {
  Matrix out = frozen.users;
  for (std::size_t u = 0; u < out.rows(); ++u) {
    if (mask.use_alpha) axpy(params.alpha[u], params.dirs.pop, out.row(u));
    if (mask.use_beta) axpy(params.beta[u], params.dirs.pref.row(u), out.row(u));
  }
  return out;
}

double eval_bpr_loss(const Matrix& corrected_users, const Matrix& items,
                     const InteractionDataset& ds, std::uint64_t sample_seed) {
  const auto batch = sample_triplets(ds, sample_seed);
  return mean_bpr_loss(corrected_users, items, batch.triplets);
}

DdcParams init_params(std::size_t num_users, DdcDirections dirs, double scale,
                      std::uint64_t seed) {
  DdcParams p{std::vector<double>(num_users, 0.0), std::vector<double>(num_users, 0.0),
              std::move(dirs)};
  if (scale > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    for (std::size_t u = 0; u < num_users; ++u) {
      p.alpha[u] = normal(rng);
      p.beta[u] = normal(rng);
    }
  }
  return p;
}

FinetuneResult finetune(const InteractionDataset& ds, const FrozenModel& frozen,
                        const DdcDirections& dirs, const FinetuneConfig& cfg) {
  if (cfg.batch_size < 1 || cfg.patience < 1 || !(cfg.learning_rate >= 0)) {
    throw std::invalid_argument("invalid fine-tuning configuration");
  }
  if (frozen.users.rows() != ds.num_users() || frozen.items.rows() != ds.num_items()) {
    throw std::invalid_argument("frozen tables do not match dataset");
  }
  const std::size_t nu = ds.num_users();
  DdcParams params = init_params(nu, dirs, cfg.init_scale, cfg.seed);
  Optimizer alpha_opt(cfg.optimizer, nu, cfg.learning_rate);
  Optimizer beta_opt(cfg.optimizer, nu, cfg.learning_rate);

  FinetuneResult result;
  std::vector<double> g_alpha(nu), g_beta(nu);
  std::size_t since_best = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; cfg.max_epochs == 0 || epoch < cfg.max_epochs; ++epoch) {
    const auto triplets = sample_triplets(ds, epoch_seed(cfg.seed, epoch)).triplets;
    for (std::size_t b = 0; b < triplets.size(); b += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, triplets.size() - b);
      const double inv_b = 1.0 / static_cast<double>(n);
      std::fill(g_alpha.begin(), g_alpha.end(), 0.0);
      std::fill(g_beta.begin(), g_beta.end(), 0.0);
      for (std::size_t p = b; p < b + n; ++p) {
        const auto g = ddc_gradients(frozen, params, triplets[p], cfg.rule);
        g_alpha[triplets[p].u] += inv_b * g.d_alpha;
        g_beta[triplets[p].u] += inv_b * g.d_beta;
      }
      alpha_opt.step(params.alpha, g_alpha);
      beta_opt.step(params.beta, g_beta);
    }
    const Matrix corrected = compose_final(frozen, params);
    const double l_eval = mean_bpr_loss(corrected, frozen.items, triplets);
    if (!std::isfinite(l_eval)) {
      throw NumericalError("fine-tuning diverged at epoch " + std::to_string(epoch));
    }
    const double mrr = evaluate(corrected, frozen.items, ds, EvalSplit::Valid, cfg.eval_k).mrr;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.records.push_back({epoch, l_eval, mrr, seconds});
    if (result.trace.records.size() == 1 || mrr > result.trace.best_mrr()) {
      result.trace.best_epoch = result.trace.records.size() - 1;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::vector<AblationRow> run_ablation_grid(const InteractionDataset& ds,
                                           const FrozenModel& frozen,
                                           const DdcDirections& dirs,
                                           const FinetuneConfig& cfg,
                                           std::uint64_t l_eval_seed, std::size_t report_k) {
  std::vector<AblationRow> rows;
  auto row = [&](std::string name, const Matrix& users) {
    AblationRow r;
    r.name = std::move(name);
    r.report = evaluate(users, frozen.items, ds, EvalSplit::Test, report_k);
    r.l_eval = eval_bpr_loss(users, frozen.items, ds, l_eval_seed);
    return r;
  };
  rows.push_back(row("baseline", frozen.users));
  DdcParams main_params;
  const UpdateRule main_rule{kBeta, kAlpha};
  for (const auto& rule : UpdateRule::grid()) {
    FinetuneConfig c = cfg;
    c.rule = rule;
    auto result = finetune(ds, frozen, dirs, c);
    rows.push_back(row(rule.name(), compose_final(frozen, result.params)));
    if (rule == main_rule) main_params = std::move(result.params);
  }
  rows.push_back(row("full", compose_final(frozen, main_params)));
  rows.push_back(row("wo_alpha", compose_final(frozen, main_params, {false, true})));
  rows.push_back(row("wo_beta", compose_final(frozen, main_params, {true, false})));
  return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "rule,mrr10,ndcg10,map10,recall10,avgpop10,l_eval\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.name << ',' << r.report.mrr << ',' << r.report.ndcg << ',' << r.report.map << ','
        << r.report.recall << ',' << r.report.avgpop << ',' << r.l_eval << '\n';
  }
}

void write_params_csv(std::ostream& out, const DdcParams& params) {
  out << "user_id,alpha,beta\n" << std::setprecision(10);
  for (std::size_t u = 0; u < params.alpha.size(); ++u) {
    out << u << ',' << params.alpha[u] << ',' << params.beta[u] << '\n';
  }
}

}  // namespace ddcrec
