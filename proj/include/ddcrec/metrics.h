#pragma once

#include <span>
#include <string>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/linalg.h"

namespace ddcrec {

enum class EvalSplit { Valid, Test };

std::string to_string(EvalSplit s);

struct RankingReport {
  std::size_t k = 10;
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double map = 0.0;
  double avgpop = 0.0;
  std::size_t num_evaluated_users = 0;
  // Users with no relevant items in the split.
  std::size_t num_skipped_users = 0;
};

struct UserMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double map = 0.0;
  double avgpop = 0.0;
};

// Candidates are all items not in `exclude` (sorted), by descending score,
// ties broken by ascending item id.
std::vector<Index> rank_items(std::span<const double> user_vec, const Matrix& items,
                              std::span<const Index> exclude);

// Same order as rank_items, truncated to the first k entries.
std::vector<Index> top_k(std::span<const double> user_vec, const Matrix& items,
                         std::span<const Index> exclude, std::size_t k);

// Metrics of one ranked list against a sorted relevant set.
UserMetrics user_metrics(std::span<const Index> ranked, std::span<const Index> relevant,
                         std::size_t k, std::span<const std::uint32_t> pop);

RankingReport evaluate(const Matrix& users, const Matrix& items, const InteractionDataset& ds,
                       EvalSplit split, std::size_t k);

// One ranking pass per user, reported at every cutoff in `ks`.
std::vector<RankingReport> evaluate(const Matrix& users, const Matrix& items,
                                    const InteractionDataset& ds, EvalSplit split,
                                    std::span<const std::size_t> ks);

}  // namespace ddcrec
