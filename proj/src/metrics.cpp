#include "ddcrec/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ddcrec {

std::string to_string(EvalSplit s) { return s == EvalSplit::Valid ? "valid" : "test"; }

namespace {

struct Candidate {
  double score;
  Index item;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

std::vector<Candidate> candidates(std::span<const double> user_vec, const Matrix& items,
                                  std::span<const Index> exclude) {
  std::vector<Candidate> out;
  out.reserve(items.rows());
  auto ex = exclude.begin();
  for (std::size_t i = 0; i < items.rows(); ++i) {
    while (ex != exclude.end() && *ex < i) ++ex;
    if (ex != exclude.end() && *ex == i) continue;
    out.push_back({dot(user_vec, items.row(i)), static_cast<Index>(i)});
  }
  return out;
}

std::vector<Index> merge_sorted(std::span<const Index> a, std::span<const Index> b) {
  std::vector<Index> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<Index> rank_items(std::span<const double> user_vec, const Matrix& items,
                              std::span<const Index> exclude) {
  auto c = candidates(user_vec, items, exclude);
  std::sort(c.begin(), c.end(), better);
  std::vector<Index> out(c.size());
  for (std::size_t r = 0; r < c.size(); ++r) out[r] = c[r].item;
  return out;
}

std::vector<Index> top_k(std::span<const double> user_vec, const Matrix& items,
                         std::span<const Index> exclude, std::size_t k) {
  auto c = candidates(user_vec, items, exclude);
  const std::size_t n = std::min(k, c.size());
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n), c.end(), better);
  std::vector<Index> out(n);
  for (std::size_t r = 0; r < n; ++r) out[r] = c[r].item;
  return out;
}

UserMetrics user_metrics(std::span<const Index> ranked, std::span<const Index> relevant,
                         std::size_t k, std::span<const std::uint32_t> pop) {
  UserMetrics m;
  const std::size_t n = std::min(k, ranked.size());
  std::size_t hits = 0;
  double dcg = 0.0;
  double ap = 0.0;
  double pop_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const Index item = ranked[r];
    pop_sum += static_cast<double>(pop[item]);
    if (!std::binary_search(relevant.begin(), relevant.end(), item)) continue;
    ++hits;
    const double rank = static_cast<double>(r + 1);
    if (hits == 1) m.mrr = 1.0 / rank;
    dcg += 1.0 / std::log2(rank + 1.0);
    ap += static_cast<double>(hits) / rank;
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(relevant.size(), k);
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  if (!relevant.empty()) {
    m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    m.ndcg = dcg / idcg;
    m.map = ap / static_cast<double>(ideal);
  }
  m.avgpop = n > 0 ? pop_sum / static_cast<double>(n) : 0.0;
  return m;
}

std::vector<RankingReport> evaluate(const Matrix& users, const Matrix& items,
                                    const InteractionDataset& ds, EvalSplit split,
                                    std::span<const std::size_t> ks) {
  if (ks.empty()) throw std::invalid_argument("no cutoffs given");
  for (std::size_t k : ks) {
    if (k < 1) throw std::invalid_argument("cutoff K must be >= 1");
  }
  if (users.cols() != items.cols()) throw std::invalid_argument("table dimensions differ");
  if ((split == EvalSplit::Valid ? ds.valid() : ds.test()).empty()) {
    throw DataError("evaluation split '" + to_string(split) + "' is empty");
  }
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  std::vector<RankingReport> reports(ks.size());
  for (std::size_t c = 0; c < ks.size(); ++c) reports[c].k = ks[c];

  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto uid = static_cast<Index>(u);
    const auto& relevant = split == EvalSplit::Valid ? ds.valid_items(uid) : ds.test_items(uid);
    if (relevant.empty()) {
      for (auto& r : reports) ++r.num_skipped_users;
      continue;
    }
    const auto exclude = split == EvalSplit::Valid
                             ? ds.user_hist(uid)
                             : merge_sorted(ds.user_hist(uid), ds.valid_items(uid));
    const auto ranked = top_k(users.row(u), items, exclude, k_max);
    for (std::size_t c = 0; c < ks.size(); ++c) {
      const auto m = user_metrics(ranked, relevant, ks[c], ds.pop());
      auto& r = reports[c];
      r.recall += m.recall;
      r.ndcg += m.ndcg;
      r.mrr += m.mrr;
      r.map += m.map;
      r.avgpop += m.avgpop;
      ++r.num_evaluated_users;
    }
  }
  for (auto& r : reports) {
    if (r.num_evaluated_users == 0) continue;
    const double n = static_cast<double>(r.num_evaluated_users);
    r.recall /= n;
    r.ndcg /= n;
    r.mrr /= n;
    r.map /= n;
    r.avgpop /= n;
  }
  return reports;
}

RankingReport evaluate(const Matrix& users, const Matrix& items, const InteractionDataset& ds,
                       EvalSplit split, std::size_t k) {
  const std::size_t ks[] = {k};
  return evaluate(users, items, ds, split, ks).front();
}

}  // namespace ddcrec
