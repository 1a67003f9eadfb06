#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library code under test except plain data containers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/linalg.h"
#include "ddcrec/metrics.h"

namespace ddcrec::testing {

inline double rel_err(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double diff = std::abs(analytic - numeric);
  return scale < 1e-6 ? diff : diff / scale;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double naive_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double naive_bpr(double margin) { return std::log1p(std::exp(-margin)); }

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

inline std::vector<double> unit_random(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double s = 0.0;
  for (double& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

// Literal-formula ranking metrics for one user, from full scores.
struct LiteralMetrics {
  double recall = 0, ndcg = 0, mrr = 0, map = 0, avgpop = 0;
};

inline LiteralMetrics literal_metrics(const std::vector<double>& scores,
                                      const std::set<Index>& exclude,
                                      const std::set<Index>& relevant, std::size_t k,
                                      const std::vector<std::uint32_t>& pop) {
  // rank(i) = 1 + number of candidates strictly ahead of i.
  std::map<std::size_t, Index> by_rank;
  for (Index i = 0; i < scores.size(); ++i) {
    if (exclude.count(i)) continue;
    std::size_t ahead = 0;
    for (Index j = 0; j < scores.size(); ++j) {
      if (j == i || exclude.count(j)) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++ahead;
    }
    by_rank[ahead + 1] = i;
  }
  LiteralMetrics m;
  double dcg = 0, idcg = 0, prec_sum = 0, pop_sum = 0;
  std::size_t hits = 0, listed = 0;
  for (const auto& [rank, item] : by_rank) {
    if (rank > k) break;
    ++listed;
    pop_sum += pop[item];
    if (!relevant.count(item)) continue;
    ++hits;
    if (m.mrr == 0) m.mrr = 1.0 / static_cast<double>(rank);
    dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    prec_sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  const std::size_t ideal = std::min<std::size_t>(relevant.size(), k);
  for (std::size_t r = 1; r <= ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  m.ndcg = dcg / idcg;
  m.map = prec_sum / static_cast<double>(ideal);
  m.avgpop = listed ? pop_sum / static_cast<double>(listed) : 0.0;
  return m;
}

// Repeated peeling straight from the definition, on an interaction list.
inline std::set<std::pair<Index, Index>> literal_k_core(std::vector<Interaction> xs,
                                                        std::size_t k) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<Index, std::size_t> du, di;
    for (const auto& x : xs) {
      ++du[x.user];
      ++di[x.item];
    }
    std::vector<Interaction> kept;
    for (const auto& x : xs) {
      if (du[x.user] >= k && di[x.item] >= k) kept.push_back(x);
    }
    changed = kept.size() != xs.size();
    xs = std::move(kept);
  }
  std::set<std::pair<Index, Index>> out;
  for (const auto& x : xs) out.insert({x.user, x.item});
  return out;
}

// Small split dataset with every user and item covered by train.
inline InteractionDataset tiny_dataset(std::size_t nu, std::size_t ni,
                                       std::vector<Interaction> train,
                                       std::vector<Interaction> valid = {},
                                       std::vector<Interaction> test = {}) {
  return InteractionDataset(nu, ni, std::move(train), std::move(valid), std::move(test));
}

// Random split dataset where user u has `per_user` train items and one valid
// and one test item. Every item appears in train.
inline InteractionDataset random_dataset(std::size_t nu, std::size_t ni, std::size_t per_user,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Interaction> train, valid, test;
  std::vector<Index> items(ni);
  for (Index i = 0; i < ni; ++i) items[i] = i;
  for (Index u = 0; u < nu; ++u) {
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t p = 0; p < per_user; ++p) train.push_back({u, items[p]});
    valid.push_back({u, items[per_user]});
    test.push_back({u, items[per_user + 1]});
  }
  // Cover every item in train through user 0's neighbours when needed.
  std::set<Index> covered;
  for (const auto& x : train) covered.insert(x.item);
  std::set<std::pair<Index, Index>> used;
  for (const auto& x : train) used.insert({x.user, x.item});
  for (const auto& x : valid) used.insert({x.user, x.item});
  for (const auto& x : test) used.insert({x.user, x.item});
  for (Index i = 0; i < ni; ++i) {
    if (covered.count(i)) continue;
    for (Index u = 0; u < nu; ++u) {
      if (!used.count({u, i})) {
        train.push_back({u, i});
        used.insert({u, i});
        break;
      }
    }
  }
  return InteractionDataset(nu, ni, std::move(train), std::move(valid), std::move(test));
}

// Random instance: every item is in someone's train; held-out items never
// collide with train. Integer embeddings make score ties common.
inline InteractionDataset random_small(std::size_t nu, std::size_t ni, std::mt19937_64& rng) {
  for (;;) {
    std::vector<Interaction> train, valid, test;
    std::uniform_int_distribution<int> role(0, 5);
    for (Index u = 0; u < nu; ++u) {
      bool has_train = false;
      for (Index i = 0; i < ni; ++i) {
        const int r = role(rng);
        if (r <= 1) {
          train.push_back({u, i});
          has_train = true;
        } else if (r == 2) {
          valid.push_back({u, i});
        } else if (r == 3) {
          test.push_back({u, i});
        }
      }
      if (!has_train) train.push_back({u, static_cast<Index>(rng() % ni)});
    }
    // Give every item a train interaction, then drop held-out duplicates.
    std::vector<bool> covered(ni, false);
    for (const auto& x : train) covered[x.item] = true;
    for (Index i = 0; i < ni; ++i)
      if (!covered[i]) train.push_back({static_cast<Index>(i % nu), i});
    auto in_train = [&](const Interaction& x) {
      return std::find(train.begin(), train.end(), x) != train.end();
    };
    std::erase_if(valid, in_train);
    std::erase_if(test, in_train);
    if (valid.empty() || test.empty()) continue;
    return InteractionDataset(nu, ni, train, valid, test);
  }
}

inline Matrix integer_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> v(-2, 2);
  Matrix m(rows, cols);
  for (double& x : m.values()) x = v(rng);
  return m;
}

inline LiteralMetrics literal_report(const Matrix& users, const Matrix& items,
                              const InteractionDataset& ds, EvalSplit split, std::size_t k,
                              std::size_t& evaluated) {
  LiteralMetrics sum;
  evaluated = 0;
  for (Index u = 0; u < ds.num_users(); ++u) {
    const auto& rel = split == EvalSplit::Valid ? ds.valid_items(u) : ds.test_items(u);
    if (rel.empty()) continue;
    std::set<Index> exclude(ds.user_hist(u).begin(), ds.user_hist(u).end());
    if (split == EvalSplit::Test) exclude.insert(ds.valid_items(u).begin(), ds.valid_items(u).end());
    std::vector<double> scores(ds.num_items());
    for (Index i = 0; i < ds.num_items(); ++i) {
      double s = 0;
      for (std::size_t c = 0; c < users.cols(); ++c) s += users(u, c) * items(i, c);
      scores[i] = s;
    }
    const auto m = literal_metrics(scores, exclude, std::set<Index>(rel.begin(), rel.end()), k,
                                   ds.pop());
    sum.recall += m.recall;
    sum.ndcg += m.ndcg;
    sum.mrr += m.mrr;
    sum.map += m.map;
    sum.avgpop += m.avgpop;
    ++evaluated;
  }
  const double n = static_cast<double>(evaluated);
  return {sum.recall / n, sum.ndcg / n, sum.mrr / n, sum.map / n, sum.avgpop / n};
}

}  // namespace ddcrec::testing
