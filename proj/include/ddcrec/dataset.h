#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace ddcrec {

using Index = std::uint32_t;

struct Interaction {
  Index user = 0;
  Index item = 0;

  auto operator<=>(const Interaction&) const = default;
};

// Interaction log before splitting. Interactions are unique and keep the
// order in which they were first seen.
struct UnsplitDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<Interaction> interactions;
  // Dense index -> raw id. Synthetic data uses the decimal index.
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
};

// A split dataset. `pop`, `user_hist` and `item_users` are derived from the
// train split only.
class InteractionDataset {
 public:
  InteractionDataset() = default;
  // Validates the splits (range, duplicates, disjointness, coverage by train)
  // and builds the derived indices. Throws DataError.
  InteractionDataset(std::size_t num_users, std::size_t num_items,
                     std::vector<Interaction> train, std::vector<Interaction> valid,
                     std::vector<Interaction> test);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }

  const std::vector<Interaction>& train() const { return train_; }
  const std::vector<Interaction>& valid() const { return valid_; }
  const std::vector<Interaction>& test() const { return test_; }

  const std::vector<std::uint32_t>& pop() const { return pop_; }
  // Sorted train items of user u.
  const std::vector<Index>& user_hist(Index u) const { return user_hist_[u]; }
  // Sorted train users of item i.
  const std::vector<Index>& item_users(Index i) const { return item_users_[i]; }
  const std::vector<Index>& valid_items(Index u) const { return valid_hist_[u]; }
  const std::vector<Index>& test_items(Index u) const { return test_hist_[u]; }

  bool in_train(Index u, Index i) const;

  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<Interaction> train_, valid_, test_;
  std::vector<std::uint32_t> pop_;
  std::vector<std::vector<Index>> user_hist_, item_users_, valid_hist_, test_hist_;
};

struct Triplet {
  Index u = 0;
  Index i = 0;
  Index j = 0;
};

struct TripletBatch {
  std::vector<Triplet> triplets;
  // Users whose history covers the whole catalog; their interactions were skipped.
  std::size_t skipped_users = 0;
};

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct SyntheticSpec {
  std::size_t num_users = 500;
  std::size_t num_items = 300;
  double zipf_exponent = 1.2;
  std::size_t interactions_per_user = 40;
  std::uint64_t seed = 0;
  // Items are partitioned into this many taste clusters; each user has one.
  std::size_t num_clusters = 10;
  // Mean share of a user's interactions drawn from their own cluster.
  double niche_share = 0.3;
  // Per-user shares are uniform in [niche_share - spread, niche_share + spread].
  double niche_spread = 0.0;
};

// Parses `user<TAB>item[<TAB>...]` lines. `source` names the input in errors.
UnsplitDataset parse_interactions(std::istream& in, const std::string& source = "<stream>");
UnsplitDataset load_interactions(const std::filesystem::path& path);

// Largest sub-log in which every user and item has at least k interactions.
UnsplitDataset k_core_filter(const UnsplitDataset& ds, std::size_t k);

// Per-user random holdout. Each user keeps at least one train item; items
// left without train interactions are dropped and indices re-densified.
InteractionDataset split(const UnsplitDataset& ds, const SplitRatios& ratios,
                         std::uint64_t seed);

// One triplet per train interaction in shuffled order; negatives uniform over
// the items the user has not interacted with in train.
TripletBatch sample_triplets(const InteractionDataset& ds, std::uint64_t epoch_seed);

UnsplitDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ddcrec
