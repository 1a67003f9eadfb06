#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/linalg.h"
#include "ddcrec/metrics.h"
#include "ddcrec/model.h"
#include "ddcrec/trainer.h"

namespace ddcrec {

// Directional decomposition and correction: per-user scalars alpha_u, beta_u
// move a frozen user embedding along the global popularity direction and the
// user's own preference direction.

// Which corrections a term receives: `a` = alpha_u * e_pop, `b` = beta_u * e_pref.
enum Correction : std::uint8_t { kNone = 0, kAlpha = 1, kBeta = 2, kBoth = 3 };

struct UpdateRule {
  std::uint8_t pos = kBeta;
  std::uint8_t neg = kAlpha;

  // "b_a", "ab_a", ... (positive term first). Throws on unknown or empty rules.
  static UpdateRule parse(const std::string& name);
  // The 9 rules over {a, b, ab} x {a, b, ab}.
  static std::vector<UpdateRule> grid();
  std::string name() const;

  bool operator==(const UpdateRule&) const = default;
};

// Frozen converged tables (post-propagation for LightGCN).
struct FrozenModel {
  Matrix users;
  Matrix items;
};

struct DdcDirections {
  std::vector<double> pop;                // unit e_pop
  Matrix pref;                            // num_users x d, unit rows
};

struct DdcParams {
  std::vector<double> alpha;
  std::vector<double> beta;
  DdcDirections dirs;
};

struct EffectiveUserEmbeddings {
  std::vector<double> pos_term;
  std::vector<double> neg_term;
};

// e_pop from the frozen items and e_pref for every user (train history, top-k fraction).
DdcDirections build_directions(const FrozenModel& frozen, const InteractionDataset& ds,
                               double rho = 0.05, double k = 0.3);

EffectiveUserEmbeddings effective_embeddings(const FrozenModel& frozen, const DdcParams& params,
                                             Index u, const UpdateRule& rule);

double ddc_margin(const FrozenModel& frozen, const DdcParams& params, const Triplet& t,
                  const UpdateRule& rule);

double ddc_loss(const FrozenModel& frozen, const DdcParams& params, const Triplet& t,
                const UpdateRule& rule);

struct ScalarGradient {
  double d_alpha = 0.0;
  double d_beta = 0.0;
  double loss = 0.0;
};

ScalarGradient ddc_gradients(const FrozenModel& frozen, const DdcParams& params,
                             const Triplet& t, const UpdateRule& rule);

struct CompositionMask {
  bool use_alpha = true;
  bool use_beta = true;
};

// e_u + alpha_u e_pop + beta_u e_pref_u, with either term switchable off.
Matrix compose_final(const FrozenModel& frozen, const DdcParams& params,
                     CompositionMask mask = {});

// Plain BPR loss of corrected users against frozen items over one sampled epoch.
double eval_bpr_loss(const Matrix& corrected_users, const Matrix& items,
                     const InteractionDataset& ds, std::uint64_t sample_seed);

struct FinetuneConfig {
  UpdateRule rule{};
  double k = 0.3;
  double rho = 0.05;
  double learning_rate = 1e-2;
  double init_scale = 0.01;
  std::size_t batch_size = 8192;
  std::size_t patience = 50;
  std::size_t max_epochs = 0;  // 0 = until early stopping
  std::uint64_t seed = 7;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t eval_k = 10;
};

struct FinetuneResult {
  DdcParams params;  // scalars at the best validation epoch
  // loss column holds L_eval of the composed embeddings after each epoch.
  TrainTrace trace;
};

DdcParams init_params(std::size_t num_users, DdcDirections dirs, double scale,
                      std::uint64_t seed);

FinetuneResult finetune(const InteractionDataset& ds, const FrozenModel& frozen,
                        const DdcDirections& dirs, const FinetuneConfig& cfg);

struct AblationRow {
  std::string name;
  RankingReport report;
  double l_eval = 0.0;
};

// Baseline row, the 9 rule rows, then full / wo_alpha / wo_beta compositions of
// the b_a run. Reports are on the test split at `report_k`.
std::vector<AblationRow> run_ablation_grid(const InteractionDataset& ds,
                                           const FrozenModel& frozen,
                                           const DdcDirections& dirs,
                                           const FinetuneConfig& cfg,
                                           std::uint64_t l_eval_seed,
                                           std::size_t report_k = 10);

// rule,mrr10,ndcg10,map10,recall10,avgpop10,l_eval
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

// user_id,alpha,beta
void write_params_csv(std::ostream& out, const DdcParams& params);

}  // namespace ddcrec
