#include "ddcrec/trainer.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

#include "ddcrec/metrics.h"

namespace ddcrec {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bpr_loss(double margin) {
  // ln(1 + e^{-m})
  if (margin > 0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

TripletGradient bpr_gradients(const EmbeddingTable& table, const Triplet& t, double l2) {
  const auto eu = table.users.row(t.u);
  const auto ei = table.items.row(t.i);
  const auto ej = table.items.row(t.j);
  const std::size_t d = table.dim();
  TripletGradient g;
  g.user.resize(d);
  g.pos.resize(d);
  g.neg.resize(d);
  const double margin = dot(eu, ei) - dot(eu, ej);
  g.loss = bpr_loss(margin);
  g.weight = sigmoid(-margin);
  const double w = g.weight;
  for (std::size_t k = 0; k < d; ++k) {
    g.user[k] = -w * (ei[k] - ej[k]) + 2.0 * l2 * eu[k];
    g.pos[k] = -w * eu[k] + 2.0 * l2 * ei[k];
    g.neg[k] = w * eu[k] + 2.0 * l2 * ej[k];
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(l2 >= 0)) throw std::invalid_argument("l2 must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (eval_k < 1) throw std::invalid_argument("eval_k must be >= 1");
}

Optimizer::Optimizer(OptimizerKind kind, std::size_t size, double lr, double beta1,
                     double beta2, double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (kind_ == OptimizerKind::Adam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (kind_ == OptimizerKind::SGD) {
    for (std::size_t p = 0; p < params.size(); ++p) params[p] -= lr_ * grad[p];
    return;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    m_[p] = beta1_ * m_[p] + (1.0 - beta1_) * grad[p];
    v_[p] = beta2_ * v_[p] + (1.0 - beta2_) * grad[p] * grad[p];
    const double mhat = m_[p] / c1;
    const double vhat = v_[p] / c2;
    params[p] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

void TrainTrace::write_csv(std::ostream& out, bool with_timing) const {
  out << "epoch,loss,val_mrr10,seconds\n";
  std::ostringstream line;
  for (const auto& r : records) {
    line.str("");
    line << r.epoch << ',' << std::setprecision(10) << r.loss << ',' << r.val_mrr10 << ','
         << std::setprecision(6) << (with_timing ? r.seconds : 0.0) << '\n';
    out << line.str();
  }
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  // splitmix64 of (seed, epoch)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double mean_bpr_loss(const Matrix& users, const Matrix& items,
                     std::span<const Triplet> triplets) {
  if (triplets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : triplets) {
    const auto eu = users.row(t.u);
    sum += bpr_loss(dot(eu, items.row(t.i)) - dot(eu, items.row(t.j)));
  }
  return sum / static_cast<double>(triplets.size());
}

double train_step(EmbeddingTable& table0, const NormalizedAdjacency* adj,
                  const BackboneConfig& cfg, std::span<const Triplet> batch, double l2,
                  Optimizer& user_opt, Optimizer& item_opt) {
  if (batch.empty()) return 0.0;
  const bool gcn = cfg.kind == Backbone::LightGCN;
  std::optional<EmbeddingTable> propagated;
  if (gcn) propagated = forward(table0, adj, cfg);
  const EmbeddingTable& scoring = gcn ? *propagated : table0;

  const std::size_t d = table0.dim();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  EmbeddingTable grad{Matrix(table0.users.rows(), d), Matrix(table0.items.rows(), d)};
  double loss_sum = 0.0;
  for (const auto& t : batch) {
    const auto g = bpr_gradients(scoring, t, 0.0);
    loss_sum += g.loss;
    axpy(inv_b, g.user, grad.users.row(t.u));
    axpy(inv_b, g.pos, grad.items.row(t.i));
    axpy(inv_b, g.neg, grad.items.row(t.j));
  }
  if (gcn) grad = propagate(grad, *adj, cfg);
  if (l2 > 0) {
    const double c = 2.0 * l2 * inv_b;
    for (const auto& t : batch) {
      axpy(c, table0.users.row(t.u), grad.users.row(t.u));
      axpy(c, table0.items.row(t.i), grad.items.row(t.i));
      axpy(c, table0.items.row(t.j), grad.items.row(t.j));
    }
  }
  user_opt.step(table0.users.values(), grad.users.values());
  item_opt.step(table0.items.values(), grad.items.values());
  return loss_sum;
}

TrainResult train(const InteractionDataset& ds, const BackboneConfig& cfg,
                  const TrainConfig& tcfg, EmbeddingTable init) {
  tcfg.validate();
  if (ds.train().empty() || ds.valid().empty()) {
    throw DataError("training needs non-empty train and valid splits");
  }
  if (init.users.rows() != ds.num_users() || init.items.rows() != ds.num_items()) {
    throw std::invalid_argument("initial table does not match dataset");
  }
  std::unique_ptr<NormalizedAdjacency> adj;
  if (cfg.kind == Backbone::LightGCN) adj = std::make_unique<NormalizedAdjacency>(ds);

  EmbeddingTable table0 = std::move(init);
  Optimizer user_opt(tcfg.optimizer, table0.users.values().size(), tcfg.learning_rate,
                     tcfg.beta1, tcfg.beta2, tcfg.eps);
  Optimizer item_opt(tcfg.optimizer, table0.items.values().size(), tcfg.learning_rate,
                     tcfg.beta1, tcfg.beta2, tcfg.eps);

  TrainResult result;
  std::size_t since_best = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; tcfg.max_epochs == 0 || epoch < tcfg.max_epochs; ++epoch) {
    const auto triplets = sample_triplets(ds, epoch_seed(tcfg.seed, epoch)).triplets;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < triplets.size(); b += tcfg.batch_size) {
      const std::size_t n = std::min(tcfg.batch_size, triplets.size() - b);
      loss_sum += train_step(table0, adj.get(), cfg,
                             std::span<const Triplet>(triplets).subspan(b, n), tcfg.l2,
                             user_opt, item_opt);
    }
    const double loss = loss_sum / static_cast<double>(triplets.size());
    if (!std::isfinite(loss)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                           " (loss " + std::to_string(loss) + ")");
    }
    EmbeddingTable scoring = forward(table0, adj.get(), cfg);
    const double mrr =
        evaluate(scoring.users, scoring.items, ds, EvalSplit::Valid, tcfg.eval_k).mrr;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.records.push_back({epoch, loss, mrr, seconds});

    if (result.trace.records.size() == 1 || mrr > result.trace.best_mrr()) {
      result.trace.best_epoch = result.trace.records.size() - 1;
      result.table0 = table0;
      result.final_table = std::move(scoring);
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace ddcrec
