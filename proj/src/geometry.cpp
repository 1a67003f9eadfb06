#include "ddcrec/geometry.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>

#include "ddcrec/trainer.h"

namespace ddcrec {

HeadTail head_tail_split(std::span<const std::uint32_t> pop, double rho) {
  if (!(rho > 0.0) || rho > 0.5) throw std::invalid_argument("rho must be in (0, 0.5]");
  const std::size_t n = pop.size();
  if (n < 2) throw DataError("need at least two items for a head/tail split");
  const std::size_t size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rho * static_cast<double>(n))));
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  HeadTail ht;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return pop[a] != pop[b] ? pop[a] > pop[b] : a < b;
  });
  ht.head.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return pop[a] != pop[b] ? pop[a] < pop[b] : a < b;
  });
  ht.tail.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
  return ht;
}

DirectionVector popularity_direction(const Matrix& items, std::span<const std::uint32_t> pop,
                                     double rho) {
  if (items.rows() != pop.size()) throw std::invalid_argument("item table/pop size mismatch");
  const auto ht = head_tail_split(pop, rho);
  std::vector<double> diff(items.cols(), 0.0);
  for (Index i : ht.head) axpy(1.0 / static_cast<double>(ht.head.size()), items.row(i), diff);
  for (Index i : ht.tail) axpy(-1.0 / static_cast<double>(ht.tail.size()), items.row(i), diff);
  auto dir = DirectionVector::normalize(std::move(diff));
  if (!dir) throw NumericalError("degenerate popularity geometry: head and tail centroids coincide");
  return *dir;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("pearson needs two equal-length series of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw NumericalError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void GeometryReport::write_csv(std::ostream& out, std::span<const std::uint32_t> pop) const {
  out << "item_id,pop,projection\n" << std::setprecision(10);
  for (std::size_t i = 0; i < projections.size(); ++i) {
    out << i << ',' << pop[i] << ',' << projections[i] << '\n';
  }
}

GeometryReport projection_correlation(const Matrix& items, std::span<const std::uint32_t> pop,
                                      const DirectionVector& e_pop) {
  if (items.rows() != pop.size()) throw std::invalid_argument("item table/pop size mismatch");
  GeometryReport report;
  report.projections.resize(items.rows());
  for (std::size_t i = 0; i < items.rows(); ++i) {
    report.projections[i] = dot(items.row(i), e_pop.values());
  }
  std::vector<double> p(pop.begin(), pop.end());
  report.pearson_r = pearson(p, report.projections);
  return report;
}

DirectionVector preference_direction(std::span<const double> user_vec,
                                     std::span<const Index> hist, const Matrix& items,
                                     double k) {
  if (!(k > 0.0) || k > 1.0) throw std::invalid_argument("k must be in (0, 1]");
  if (hist.empty()) throw DataError("preference direction needs a non-empty history");
  std::vector<std::pair<double, Index>> scored;
  scored.reserve(hist.size());
  for (Index i : hist) scored.emplace_back(dot(user_vec, items.row(i)), i);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  // Guard against k * n landing a hair above an integer.
  const auto top = static_cast<std::size_t>(
      std::ceil(k * static_cast<double>(hist.size()) - 1e-9));
  const std::size_t count = std::clamp<std::size_t>(top, 1, hist.size());
  std::vector<double> sum(items.cols(), 0.0);
  for (std::size_t r = 0; r < count; ++r) axpy(1.0, items.row(scored[r].second), sum);
  if (auto dir = DirectionVector::normalize(std::move(sum))) return *dir;
  const auto best = items.row(scored.front().second);
  if (auto dir = DirectionVector::normalize({best.begin(), best.end()})) return *dir;
  throw NumericalError("preference direction undefined: top item embedding is zero");
}

DirectionVector ideal_update_direction(Index u, const InteractionDataset& ds,
                                       const Matrix& items) {
  const auto& hist = ds.user_hist(u);
  const std::size_t n_neg = ds.num_items() - hist.size();
  if (hist.empty() || n_neg == 0) {
    throw DataError("ideal direction needs both positive and non-interacted items");
  }
  std::vector<double> pos(items.cols(), 0.0), all(items.cols(), 0.0);
  for (Index i : hist) axpy(1.0, items.row(i), pos);
  for (std::size_t i = 0; i < items.rows(); ++i) axpy(1.0, items.row(i), all);
  // mean(pos) - mean(neg), with sum(neg) = sum(all) - sum(pos)
  std::vector<double> diff(items.cols());
  const double np = static_cast<double>(hist.size());
  const double nn = static_cast<double>(n_neg);
  for (std::size_t k = 0; k < diff.size(); ++k) {
    diff[k] = pos[k] / np - (all[k] - pos[k]) / nn;
  }
  auto dir = DirectionVector::normalize(std::move(diff));
  if (!dir) throw NumericalError("ideal direction undefined: centroids coincide");
  return *dir;
}

std::optional<double> gradient_alignment(Index u, const InteractionDataset& ds,
                                         const EmbeddingTable& table,
                                         const AlignmentOptions& opts) {
  const auto ideal = ideal_update_direction(u, ds, table.items);
  const auto& hist = ds.user_hist(u);
  std::vector<Index> negatives;
  negatives.reserve(ds.num_items() - hist.size());
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    if (!ds.in_train(u, static_cast<Index>(i))) negatives.push_back(static_cast<Index>(i));
  }
  std::mt19937_64 rng(epoch_seed(opts.seed, u));
  std::uniform_int_distribution<std::size_t> pick_pos(0, hist.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_neg(0, negatives.size() - 1);
  const auto eu = table.users.row(u);
  std::vector<double> descent(table.dim(), 0.0);
  for (std::size_t s = 0; s < opts.num_samples; ++s) {
    const auto ei = table.items.row(hist[pick_pos(rng)]);
    const auto ej = table.items.row(negatives[pick_neg(rng)]);
    const double w = sigmoid(-(dot(eu, ei) - dot(eu, ej)));
    axpy(w, ei, descent);
    axpy(-w, ej, descent);
  }
  if (norm(descent) < 1e-300) return std::nullopt;
  return cosine(descent, ideal.values());
}

std::vector<double> orthogonal_principal_axis(const Matrix& items, std::span<const double> axis,
                                              std::size_t iterations) {
  const std::size_t n = items.rows();
  const std::size_t d = items.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0 / static_cast<double>(n), items.row(i), mean);
  // Centered rows with the `axis` component removed.
  Matrix resid(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = resid.row(i);
    for (std::size_t c = 0; c < d; ++c) r[c] = items(i, c) - mean[c];
    axpy(-dot(r, axis), axis, r);
  }
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  for (std::size_t c = 0; c < d; ++c) v[c] += 1e-3 * static_cast<double>(c % 7);
  std::vector<double> next(d);
  for (std::size_t it = 0; it < iterations; ++it) {
    axpy(-dot(v, axis), axis, v);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) axpy(dot(resid.row(i), v), resid.row(i), next);
    const double nn = norm(next);
    if (nn < 1e-12) break;
    for (std::size_t c = 0; c < d; ++c) v[c] = next[c] / nn;
  }
  axpy(-dot(v, axis), axis, v);
  const double nv = norm(v);
  if (nv > 1e-12) scale(1.0 / nv, v);
  return v;
}

}  // namespace ddcrec
