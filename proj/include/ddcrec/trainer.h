#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/model.h"

namespace ddcrec {

double sigmoid(double x);

// -ln sigmoid(margin), stable for large |margin|.
double bpr_loss(double margin);

struct TripletGradient {
  std::vector<double> user;
  std::vector<double> pos;
  std::vector<double> neg;
  double loss = 0.0;    // data term only
  double weight = 0.0;  // sigmoid(-margin)
};

// Gradient of -ln sigmoid(e_u.(e_i - e_j)) + l2 * (|e_u|^2 + |e_i|^2 + |e_j|^2).
TripletGradient bpr_gradients(const EmbeddingTable& table, const Triplet& t, double l2 = 0.0);

enum class OptimizerKind { SGD, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  std::size_t batch_size = 8192;
  std::size_t patience = 50;
  std::size_t max_epochs = 0;  // 0 = until early stopping
  std::uint64_t seed = 2024;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t eval_k = 10;

  void validate() const;
};

// Dense first-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t size, double lr, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_mrr10 = 0.0;
  double seconds = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;  // index into records

  double best_mrr() const { return records.empty() ? 0.0 : records[best_epoch].val_mrr10; }
  // epoch,loss,val_mrr10,seconds
  void write_csv(std::ostream& out, bool with_timing = true) const;
};

struct TrainResult {
  EmbeddingTable table0;       // trainable parameters at the best epoch
  EmbeddingTable final_table;  // propagated scoring table (== table0 for MF)
  TrainTrace trace;
};

// Seed of the triplet stream for a given epoch; shared with L_eval so that
// losses can be compared under the same triplets.
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch);

// Mean per-triplet BPR loss of a scoring table over `triplets`.
double mean_bpr_loss(const Matrix& users, const Matrix& items, std::span<const Triplet> triplets);

// One optimizer step over a batch: mean data gradient plus L2 on the touched rows.
// For LightGCN the gradient is mapped back through propagation.
double train_step(EmbeddingTable& table0, const NormalizedAdjacency* adj,
                  const BackboneConfig& cfg, std::span<const Triplet> batch, double l2,
                  Optimizer& user_opt, Optimizer& item_opt);

TrainResult train(const InteractionDataset& ds, const BackboneConfig& cfg,
                  const TrainConfig& tcfg, EmbeddingTable init);

}  // namespace ddcrec
