#include "ddcrec/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ddcrec/linalg.h"

namespace ddcrec {

namespace {

std::vector<std::vector<Index>> group_sorted(const std::vector<Interaction>& xs,
                                             std::size_t n, bool by_user) {
  std::vector<std::vector<Index>> out(n);
  for (const auto& x : xs) {
    if (by_user) {
      out[x.user].push_back(x.item);
    } else {
      out[x.item].push_back(x.user);
    }
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

bool has_duplicates(const std::vector<std::vector<Index>>& lists) {
  for (const auto& v : lists) {
    if (std::adjacent_find(v.begin(), v.end()) != v.end()) return true;
  }
  return false;
}

bool contains(const std::vector<Index>& sorted, Index x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

// Keeps interactions whose user and item survive, re-densifying both index
// spaces in order of first appearance among the kept interactions.
UnsplitDataset compact(const UnsplitDataset& ds, const std::vector<char>& user_alive,
                       const std::vector<char>& item_alive) {
  UnsplitDataset out;
  std::vector<char> user_used(ds.num_users, 0), item_used(ds.num_items, 0);
  for (const auto& x : ds.interactions) {
    if (!user_alive[x.user] || !item_alive[x.item]) continue;
    user_used[x.user] = 1;
    item_used[x.item] = 1;
  }
  auto label = [](const std::vector<std::string>& ids, std::size_t k) {
    return k < ids.size() ? ids[k] : std::to_string(k);
  };
  std::vector<Index> user_map(ds.num_users, 0), item_map(ds.num_items, 0);
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    if (!user_used[u]) continue;
    user_map[u] = static_cast<Index>(out.num_users++);
    out.user_ids.push_back(label(ds.user_ids, u));
  }
  for (std::size_t i = 0; i < ds.num_items; ++i) {
    if (!item_used[i]) continue;
    item_map[i] = static_cast<Index>(out.num_items++);
    out.item_ids.push_back(label(ds.item_ids, i));
  }
  for (const auto& x : ds.interactions) {
    if (!user_used[x.user] || !item_used[x.item]) continue;
    out.interactions.push_back({user_map[x.user], item_map[x.item]});
  }
  return out;
}

}  // namespace

InteractionDataset::InteractionDataset(std::size_t num_users, std::size_t num_items,
                                       std::vector<Interaction> train,
                                       std::vector<Interaction> valid,
                                       std::vector<Interaction> test)
    : num_users_(num_users),
      num_items_(num_items),
      train_(std::move(train)),
      valid_(std::move(valid)),
      test_(std::move(test)) {
  for (const auto* part : {&train_, &valid_, &test_}) {
    for (const auto& x : *part) {
      if (x.user >= num_users_ || x.item >= num_items_) {
        throw DataError("interaction (" + std::to_string(x.user) + ", " +
                        std::to_string(x.item) + ") out of range");
      }
    }
  }
  user_hist_ = group_sorted(train_, num_users_, true);
  item_users_ = group_sorted(train_, num_items_, false);
  valid_hist_ = group_sorted(valid_, num_users_, true);
  test_hist_ = group_sorted(test_, num_users_, true);
  if (has_duplicates(user_hist_) || has_duplicates(valid_hist_) ||
      has_duplicates(test_hist_)) {
    throw DataError("duplicate interaction within a split");
  }
  for (std::size_t u = 0; u < num_users_; ++u) {
    for (const auto* held : {&valid_hist_[u], &test_hist_[u]}) {
      if (!held->empty() && user_hist_[u].empty()) {
        throw DataError("user " + std::to_string(u) + " has held-out items but no train items");
      }
      for (Index i : *held) {
        if (contains(user_hist_[u], i)) throw DataError("train and held-out splits overlap");
        if (item_users_[i].empty()) {
          throw DataError("item " + std::to_string(i) + " appears only outside train");
        }
      }
    }
    for (Index i : valid_hist_[u]) {
      if (contains(test_hist_[u], i)) throw DataError("valid and test splits overlap");
    }
  }
  pop_.resize(num_items_);
  for (std::size_t i = 0; i < num_items_; ++i) {
    pop_[i] = static_cast<std::uint32_t>(item_users_[i].size());
  }
}

bool InteractionDataset::in_train(Index u, Index i) const {
  return contains(user_hist_[u], i);
}

UnsplitDataset parse_interactions(std::istream& in, const std::string& source) {
  UnsplitDataset ds;
  std::unordered_map<std::string, Index> users, items;
  std::set<std::pair<Index, Index>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    if (tab1 == std::string::npos || tab1 == 0) {
      throw DataError(source + ":" + std::to_string(line_no) +
                      ": expected user<TAB>item");
    }
    const auto tab2 = line.find('\t', tab1 + 1);
    std::string user = line.substr(0, tab1);
    std::string item = line.substr(tab1 + 1, tab2 == std::string::npos ? std::string::npos
                                                                         : tab2 - tab1 - 1);
    if (item.empty()) {
      throw DataError(source + ":" + std::to_string(line_no) + ": empty item id");
    }
    auto [uit, unew] = users.try_emplace(user, static_cast<Index>(ds.user_ids.size()));
    if (unew) ds.user_ids.push_back(user);
    auto [iit, inew] = items.try_emplace(item, static_cast<Index>(ds.item_ids.size()));
    if (inew) ds.item_ids.push_back(item);
    if (seen.emplace(uit->second, iit->second).second) {
      ds.interactions.push_back({uit->second, iit->second});
    }
  }
  if (ds.interactions.empty()) throw DataError(source + ": no interactions");
  ds.num_users = ds.user_ids.size();
  ds.num_items = ds.item_ids.size();
  return ds;
}

UnsplitDataset load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_interactions(in, path.string());
}

UnsplitDataset k_core_filter(const UnsplitDataset& ds, std::size_t k) {
  if (k < 1) throw DataError("k-core level must be >= 1");
  std::vector<std::size_t> udeg(ds.num_users, 0), ideg(ds.num_items, 0);
  std::vector<std::vector<Index>> uadj(ds.num_users), iadj(ds.num_items);
  for (const auto& x : ds.interactions) {
    ++udeg[x.user];
    ++ideg[x.item];
    uadj[x.user].push_back(x.item);
    iadj[x.item].push_back(x.user);
  }
  std::vector<char> ualive(ds.num_users, 1), ialive(ds.num_items, 1);
  // Queue entries: node id, with items offset by num_users.
  std::vector<std::size_t> queue;
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    if (udeg[u] < k) queue.push_back(u);
  }
  for (std::size_t i = 0; i < ds.num_items; ++i) {
    if (ideg[i] < k) queue.push_back(ds.num_users + i);
  }
  while (!queue.empty()) {
    const std::size_t node = queue.back();
    queue.pop_back();
    if (node < ds.num_users) {
      if (!ualive[node]) continue;
      ualive[node] = 0;
      for (Index i : uadj[node]) {
        if (ialive[i] && ideg[i]-- == k) queue.push_back(ds.num_users + i);
      }
    } else {
      const std::size_t item = node - ds.num_users;
      if (!ialive[item]) continue;
      ialive[item] = 0;
      for (Index u : iadj[item]) {
        if (ualive[u] && udeg[u]-- == k) queue.push_back(u);
      }
    }
  }
  UnsplitDataset out = compact(ds, ualive, ialive);
  if (out.interactions.empty()) {
    throw DataError("dataset eliminated by k-core filtering at k=" + std::to_string(k));
  }
  return out;
}

InteractionDataset split(const UnsplitDataset& ds, const SplitRatios& ratios,
                         std::uint64_t seed) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (!(ratios.train > 0) || !(ratios.valid > 0) || !(ratios.test > 0) ||
      std::abs(total - 1.0) > 1e-9) {
    throw DataError("split ratios must be positive and sum to 1");
  }
  std::vector<std::vector<Index>> per_user(ds.num_users);
  for (const auto& x : ds.interactions) per_user[x.user].push_back(x.item);

  std::mt19937_64 rng(seed);
  std::vector<Interaction> train, valid, test;
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    auto& items = per_user[u];
    if (items.empty()) continue;
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t n = items.size();
    auto portion = [n](double r) {
      return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
    };
    std::size_t n_valid = portion(ratios.valid);
    std::size_t n_test = portion(ratios.test);
    while (n_valid + n_test >= n) {
      // keep at least one train item
      if (n_test >= n_valid && n_test > 0) {
        --n_test;
      } else {
        --n_valid;
      }
    }
    const std::size_t n_train = n - n_valid - n_test;
    const auto uid = static_cast<Index>(u);
    for (std::size_t p = 0; p < n; ++p) {
      Interaction x{uid, items[p]};
      if (p < n_train) {
        train.push_back(x);
      } else if (p < n_train + n_valid) {
        valid.push_back(x);
      } else {
        test.push_back(x);
      }
    }
  }

  // Drop items (and, if any, users) without train interactions.
  std::vector<char> item_in_train(ds.num_items, 0), user_in_train(ds.num_users, 0);
  for (const auto& x : train) {
    item_in_train[x.item] = 1;
    user_in_train[x.user] = 1;
  }
  std::vector<Index> user_map(ds.num_users), item_map(ds.num_items);
  std::vector<std::string> user_ids, item_ids;
  std::size_t nu = 0, ni = 0;
  for (std::size_t u = 0; u < ds.num_users; ++u) {
    if (!user_in_train[u]) continue;
    user_map[u] = static_cast<Index>(nu++);
    user_ids.push_back(u < ds.user_ids.size() ? ds.user_ids[u] : std::to_string(u));
  }
  for (std::size_t i = 0; i < ds.num_items; ++i) {
    if (!item_in_train[i]) continue;
    item_map[i] = static_cast<Index>(ni++);
    item_ids.push_back(i < ds.item_ids.size() ? ds.item_ids[i] : std::to_string(i));
  }
  auto remap = [&](const std::vector<Interaction>& xs) {
    std::vector<Interaction> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
      if (!user_in_train[x.user] || !item_in_train[x.item]) continue;
      out.push_back({user_map[x.user], item_map[x.item]});
    }
    return out;
  };
  InteractionDataset out(nu, ni, remap(train), remap(valid), remap(test));
  out.user_ids = std::move(user_ids);
  out.item_ids = std::move(item_ids);
  return out;
}

TripletBatch sample_triplets(const InteractionDataset& ds, std::uint64_t epoch_seed) {
  TripletBatch batch;
  if (ds.train().empty()) throw DataError("cannot sample triplets from an empty train split");
  std::mt19937_64 rng(epoch_seed);
  std::uniform_int_distribution<Index> pick(0, static_cast<Index>(ds.num_items() - 1));

  std::vector<std::size_t> order(ds.train().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<char> warned(ds.num_users(), 0);
  batch.triplets.reserve(order.size());
  for (std::size_t idx : order) {
    const auto& x = ds.train()[idx];
    const auto& hist = ds.user_hist(x.user);
    if (hist.size() >= ds.num_items()) {
      if (!warned[x.user]) {
        warned[x.user] = 1;
        ++batch.skipped_users;
        std::cerr << "warning: user " << x.user
                  << " has interacted with every item; no negative exists\n";
      }
      continue;
    }
    Index j = pick(rng);
    while (contains(hist, j)) j = pick(rng);
    batch.triplets.push_back({x.user, x.item, j});
  }
  return batch;
}

UnsplitDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_users == 0 || spec.num_items == 0 || spec.interactions_per_user == 0 ||
      spec.num_clusters == 0 || spec.zipf_exponent < 0 || spec.niche_share < 0 || spec.niche_spread < 0 ||
      spec.niche_share > 1) {
    throw DataError("synthetic parameters must be positive");
  }
  if (spec.interactions_per_user > spec.num_items) {
    throw DataError("interactions_per_user exceeds num_items");
  }
  const std::size_t n_items = spec.num_items;
  const std::size_t n_clusters = std::min(spec.num_clusters, n_items);
  std::mt19937_64 rng(spec.seed);

  // rank_to_item[r] is the item with popularity rank r (0 = most popular).
  std::vector<Index> rank_to_item(n_items);
  std::iota(rank_to_item.begin(), rank_to_item.end(), Index{0});
  std::shuffle(rank_to_item.begin(), rank_to_item.end(), rng);

  std::vector<double> weight(n_items);
  std::vector<std::vector<Index>> cluster_items(n_clusters);
  for (std::size_t r = 0; r < n_items; ++r) {
    const Index item = rank_to_item[r];
    weight[item] = std::pow(static_cast<double>(r + 1), -spec.zipf_exponent);
    cluster_items[r % n_clusters].push_back(item);
  }
  std::discrete_distribution<Index> global(weight.begin(), weight.end());

  std::uniform_real_distribution<double> share_draw(
      std::max(0.0, spec.niche_share - spec.niche_spread),
      std::min(1.0, spec.niche_share + spec.niche_spread));

  UnsplitDataset ds;
  ds.num_users = spec.num_users;
  ds.num_items = n_items;
  std::vector<char> taken(n_items, 0);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    const auto& home = cluster_items[u % n_clusters];
    std::vector<Index> picked;
    picked.reserve(spec.interactions_per_user);
    auto take = [&](Index item) {
      if (taken[item]) return;
      taken[item] = 1;
      picked.push_back(item);
    };
    const double share = spec.niche_spread > 0 ? share_draw(rng) : spec.niche_share;
    const auto niche_count = static_cast<std::size_t>(
        std::lround(share * static_cast<double>(spec.interactions_per_user)));
    const std::size_t niche_target = std::min(niche_count, home.size());
    std::uniform_int_distribution<std::size_t> in_home(0, home.size() - 1);
    while (picked.size() < niche_target) take(home[in_home(rng)]);
    std::size_t rejected = 0;
    while (picked.size() < spec.interactions_per_user) {
      const std::size_t before = picked.size();
      take(global(rng));
      if (picked.size() > before) continue;
      if (++rejected > 64 * n_items) {
        // Remaining mass is negligible; fill uniformly from untaken items.
        std::vector<Index> rest;
        for (std::size_t i = 0; i < n_items; ++i) {
          if (!taken[i]) rest.push_back(static_cast<Index>(i));
        }
        std::shuffle(rest.begin(), rest.end(), rng);
        for (Index item : rest) {
          if (picked.size() == spec.interactions_per_user) break;
          take(item);
        }
      }
    }
    for (Index item : picked) {
      taken[item] = 0;
      ds.interactions.push_back({static_cast<Index>(u), item});
    }
  }
  ds.user_ids.resize(ds.num_users);
  ds.item_ids.resize(ds.num_items);
  for (std::size_t u = 0; u < ds.num_users; ++u) ds.user_ids[u] = std::to_string(u);
  for (std::size_t i = 0; i < ds.num_items; ++i) ds.item_ids[i] = std::to_string(i);
  return ds;
}

}  // namespace ddcrec
