#include <gtest/gtest.h>

#include <cmath>

#include "ddcrec/geometry.h"
#include "support.h"

using namespace ddcrec;
using ddcrec::testing::random_dataset;
using ddcrec::testing::random_matrix;
using ddcrec::testing::tiny_dataset;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST(HeadTail, SizesAndTieBreak) {
  const std::vector<std::uint32_t> pop = {5, 9, 5, 1, 9, 1, 3, 3, 2, 2};
  const auto ht = head_tail_split(pop, 0.2);
  EXPECT_EQ(ht.head, (std::vector<Index>{1, 4}));
  EXPECT_EQ(ht.tail, (std::vector<Index>{3, 5}));
  const auto tiny = head_tail_split(pop, 0.01);
  EXPECT_EQ(tiny.head.size(), 1u);
  EXPECT_EQ(tiny.tail.size(), 1u);
}

TEST(PopularityDirection, HandExample) {
  // Items 0,1 are head, 2,3 are tail with rho = 0.5.
  const auto items = rows_of({{2, 0}, {4, 0}, {0, 2}, {0, 4}});
  const std::vector<std::uint32_t> pop = {10, 9, 1, 2};
  const auto e = popularity_direction(items, pop, 0.5);
  EXPECT_NEAR(e[0], 0.70711, 1e-5);
  EXPECT_NEAR(e[1], -0.70711, 1e-5);
}

TEST(PopularityDirection, IdenticalItemsAreDegenerate) {
  const auto items = rows_of({{1, 1}, {1, 1}, {1, 1}, {1, 1}});
  const std::vector<std::uint32_t> pop = {4, 3, 2, 1};
  EXPECT_THROW(popularity_direction(items, pop, 0.25), NumericalError);
}

TEST(PopularityDirection, UnitNormAndScaleInvariant) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    auto items = random_matrix(40, 6, rng);
    std::vector<std::uint32_t> pop(40);
    for (auto& p : pop) p = static_cast<std::uint32_t>(rng() % 50);
    const auto e = popularity_direction(items, pop, 0.1);
    EXPECT_NEAR(norm(e.values()), 1.0, 1e-9);
    for (double& v : items.values()) v *= 3.7;
    const auto scaled = popularity_direction(items, pop, 0.1);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(scaled[c], e[c], 1e-12);
  }
}

TEST(Pearson, PerfectLinearRelation) {
  std::vector<double> x = {1, 4, 2, 8, 5}, y;
  for (double v : x) y.push_back(2 * v + 1);
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
}

TEST(Pearson, ConstantSeriesRejected) {
  std::vector<double> x = {1, 2, 3}, y = {4, 4, 4};
  EXPECT_THROW(pearson(x, y), NumericalError);
}

TEST(ProjectionCorrelation, ExactlyLinearProjections) {
  // One-dimensional items whose projection on e_pop = (1) is 2 pop + 1.
  const std::vector<std::uint32_t> pop = {0, 3, 7, 1, 12};
  Matrix items(5, 1);
  for (std::size_t i = 0; i < 5; ++i) items(i, 0) = 2.0 * pop[i] + 1.0;
  const auto e = popularity_direction(items, pop, 0.2);
  const auto rep = projection_correlation(items, pop, e);
  EXPECT_NEAR(rep.pearson_r, 1.0, 1e-12);
}

TEST(ProjectionCorrelation, NoiseIsUncorrelated) {
  std::mt19937_64 rng(7);
  const auto items = random_matrix(1000, 4, rng);
  std::vector<std::uint32_t> pop(1000);
  for (auto& p : pop) p = static_cast<std::uint32_t>(rng() % 100);
  const auto e = popularity_direction(items, pop, 0.05);
  EXPECT_LT(std::abs(projection_correlation(items, pop, e).pearson_r), 0.1);
}

TEST(ProjectionCorrelation, InvariantToAffinePopRescaling) {
  std::mt19937_64 rng(8);
  const auto items = random_matrix(50, 5, rng);
  std::vector<std::uint32_t> pop(50), scaled(50);
  for (std::size_t i = 0; i < 50; ++i) {
    pop[i] = static_cast<std::uint32_t>(rng() % 40);
    scaled[i] = 3 * pop[i] + 11;
  }
  const auto e = popularity_direction(items, pop, 0.1);
  const double r1 = projection_correlation(items, pop, e).pearson_r;
  const double r2 = projection_correlation(items, scaled, e).pearson_r;
  EXPECT_NEAR(r1, r2, 1e-10);
}

TEST(ProjectionCorrelation, CsvHasOneRowPerItem) {
  const auto items = rows_of({{2, 0}, {4, 0}, {0, 2}, {0, 4}});
  const std::vector<std::uint32_t> pop = {10, 9, 1, 2};
  const auto rep = projection_correlation(items, pop, popularity_direction(items, pop, 0.5));
  std::ostringstream out;
  rep.write_csv(out, pop);
  const auto text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "item_id,pop,projection");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}

TEST(PreferenceDirection, CeilingRule) {
  // Three history items, k = 0.3: only the top-scored one is used.
  const auto items = rows_of({{1, 0}, {0, 1}, {0.5, 0.5}});
  const std::vector<double> user = {2, 1};
  const std::vector<Index> hist = {0, 1, 2};
  const auto e = preference_direction(user, hist, items, 0.3);
  EXPECT_NEAR(e[0], 1.0, 1e-12);
  EXPECT_NEAR(e[1], 0.0, 1e-12);
}

TEST(PreferenceDirection, FullHistoryTwoAxes) {
  const auto items = rows_of({{1, 0}, {0, 1}});
  const std::vector<double> user = {0.3, -5};
  const std::vector<Index> hist = {0, 1};
  const auto e = preference_direction(user, hist, items, 1.0);
  EXPECT_NEAR(e[0], 0.70711, 1e-5);
  EXPECT_NEAR(e[1], 0.70711, 1e-5);
}

TEST(PreferenceDirection, IdenticalHistoryItems) {
  const auto items = rows_of({{3, 4}, {3, 4}, {3, 4}});
  const std::vector<double> user = {1, 1};
  const std::vector<Index> hist = {0, 1, 2};
  const auto e = preference_direction(user, hist, items, 1.0);
  EXPECT_NEAR(e[0], 0.6, 1e-12);
  EXPECT_NEAR(e[1], 0.8, 1e-12);
}

TEST(PreferenceDirection, CancellingSumFallsBackToTopItem) {
  const auto items = rows_of({{1, 0}, {-1, 0}});
  const std::vector<double> user = {-1, 0};
  const std::vector<Index> hist = {0, 1};
  const auto e = preference_direction(user, hist, items, 1.0);
  EXPECT_NEAR(e[0], -1.0, 1e-12);
}

TEST(PreferenceDirection, FullFractionIgnoresScores) {
  std::mt19937_64 rng(3);
  const auto items = random_matrix(12, 5, rng);
  const std::vector<Index> hist = {1, 4, 5, 9};
  std::vector<double> mean(5, 0.0);
  for (Index i : hist) axpy(0.25, items.row(i), mean);
  const double n = norm(mean);
  for (int trial = 0; trial < 10; ++trial) {
    const auto user = random_matrix(1, 5, rng);
    const auto e = preference_direction(user.row(0), hist, items, 1.0);
    EXPECT_NEAR(norm(e.values()), 1.0, 1e-9);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(e[c], mean[c] / n, 1e-12);
  }
}

TEST(PreferenceDirection, ScaleInvariant) {
  std::mt19937_64 rng(4);
  auto items = random_matrix(10, 4, rng);
  auto user = random_matrix(1, 4, rng);
  const std::vector<Index> hist = {0, 2, 3, 7, 8};
  const auto e = preference_direction(user.row(0), hist, items, 0.5);
  for (double& v : items.values()) v *= 0.01;
  for (double& v : user.values()) v *= 0.01;
  const auto s = preference_direction(user.row(0), hist, items, 0.5);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(s[c], e[c], 1e-12);
}

TEST(IdealDirection, OnePositiveOneNegative) {
  // User 0 holds item 0; item 1 is its only non-interacted item.
  const auto ds = tiny_dataset(2, 2, {{0, 0}, {1, 1}});
  const auto items = rows_of({{1, 0}, {0, 1}});
  const auto d = ideal_update_direction(0, ds, items);
  EXPECT_NEAR(d[0], 0.70711, 1e-5);
  EXPECT_NEAR(d[1], -0.70711, 1e-5);
}

TEST(IdealDirection, SharedCentroidIsDegenerate) {
  const auto ds = tiny_dataset(2, 2, {{0, 0}, {1, 1}});
  const auto items = rows_of({{1, 2}, {1, 2}});
  EXPECT_THROW(ideal_update_direction(0, ds, items), NumericalError);
}

TEST(GradientAlignment, TwoItemCaseIsPerfectlyAligned) {
  const auto ds = tiny_dataset(2, 2, {{0, 0}, {1, 1}});
  EmbeddingTable t{rows_of({{0.2, -0.1}, {1, 1}}), rows_of({{1, 0.5}, {-0.3, 2}})};
  const auto c = gradient_alignment(0, ds, t, {200, 1});
  ASSERT_TRUE(c.has_value());
  EXPECT_NEAR(*c, 1.0, 1e-12);
}

TEST(GradientAlignment, BoundedOnRandomInstances) {
  const auto ds = random_dataset(10, 20, 5, 3);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    EmbeddingTable t{random_matrix(10, 6, rng), random_matrix(20, 6, rng)};
    for (Index u = 0; u < 10; ++u) {
      const auto c = gradient_alignment(u, ds, t, {300, static_cast<std::uint64_t>(trial)});
      if (!c) continue;
      EXPECT_GE(*c, -1.0);
      EXPECT_LE(*c, 1.0);
    }
  }
}

TEST(OrthogonalAxis, UnitAndOrthogonal) {
  std::mt19937_64 rng(5);
  const auto items = random_matrix(60, 5, rng);
  std::vector<std::uint32_t> pop(60);
  for (auto& p : pop) p = static_cast<std::uint32_t>(rng() % 30);
  const auto e = popularity_direction(items, pop, 0.1);
  const auto axis = orthogonal_principal_axis(items, e.values());
  EXPECT_NEAR(norm(axis), 1.0, 1e-9);
  EXPECT_NEAR(dot(axis, e.values()), 0.0, 1e-9);
}
