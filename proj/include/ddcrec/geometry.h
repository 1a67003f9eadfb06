#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/linalg.h"
#include "ddcrec/model.h"

namespace ddcrec {

struct HeadTail {
  std::vector<Index> head;  // most popular first
  std::vector<Index> tail;  // least popular first
};

// Head/tail item sets of size max(1, floor(rho * num_items)); ties broken by
// ascending item id.
HeadTail head_tail_split(std::span<const std::uint32_t> pop, double rho);

// Unit vector from the tail-item centroid to the head-item centroid.
DirectionVector popularity_direction(const Matrix& items, std::span<const std::uint32_t> pop,
                                     double rho = 0.05);

// Unit direction of largest item variance orthogonal to `axis`, found by power
// iteration; the second coordinate of the 2D projection export.
std::vector<double> orthogonal_principal_axis(const Matrix& items, std::span<const double> axis,
                                              std::size_t iterations = 100);

// Pearson correlation; throws NumericalError when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct GeometryReport {
  std::vector<double> projections;  // e_i . e_pop
  double pearson_r = 0.0;
  double rho = 0.05;
  std::size_t head_size = 0;
  std::size_t tail_size = 0;
  // Per-user cos(-E[grad], d*_u); empty for users where it is undefined.
  std::vector<std::optional<double>> alignment;

  // item_id,pop,projection
  void write_csv(std::ostream& out, std::span<const std::uint32_t> pop) const;
};

GeometryReport projection_correlation(const Matrix& items, std::span<const std::uint32_t> pop,
                                      const DirectionVector& e_pop);

// Normalized sum of the top ceil(k * |hist|) history items by score against
// `user_vec`.
DirectionVector preference_direction(std::span<const double> user_vec,
                                     std::span<const Index> hist, const Matrix& items,
                                     double k);

// Normalized difference between the user's positive-item centroid and the
// centroid of all items the user has not interacted with.
DirectionVector ideal_update_direction(Index u, const InteractionDataset& ds,
                                       const Matrix& items);

struct AlignmentOptions {
  std::size_t num_samples = 2000;
  std::uint64_t seed = 17;
};

// Cosine between the Monte Carlo estimate of -E[grad_{e_u} L_uij] and d*_u.
std::optional<double> gradient_alignment(Index u, const InteractionDataset& ds,
                                         const EmbeddingTable& table,
                                         const AlignmentOptions& opts = {});

}  // namespace ddcrec
