#include "ddcrec/model.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace ddcrec {

std::string to_string(Backbone b) { return b == Backbone::MF ? "mf" : "lightgcn"; }

Backbone parse_backbone(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mf") return Backbone::MF;
  if (lower == "lightgcn") return Backbone::LightGCN;
  throw std::invalid_argument("unknown backbone '" + name + "'");
}

std::vector<double> BackboneConfig::resolved_weights() const {
  const std::size_t layers = kind == Backbone::MF ? 0 : num_layers;
  if (layer_weights.empty()) {
    return std::vector<double>(layers + 1, 1.0 / static_cast<double>(layers + 1));
  }
  if (layer_weights.size() != layers + 1) {
    throw std::invalid_argument("layer_weights must have num_layers + 1 entries");
  }
  double sum = 0.0;
  for (double w : layer_weights) {
    if (w < 0) throw std::invalid_argument("layer weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("layer weights must sum to 1");
  return layer_weights;
}

EmbeddingTable init_embeddings(std::size_t num_users, std::size_t num_items, std::size_t dim,
                               std::uint64_t seed, double scale) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  EmbeddingTable t{Matrix(num_users, dim), Matrix(num_items, dim)};
  if (scale == 0.0) return t;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : t.users.values()) v = normal(rng);
  for (double& v : t.items.values()) v = normal(rng);
  return t;
}

double score(const EmbeddingTable& table, Index u, Index i) {
  if (u >= table.users.rows() || i >= table.items.rows()) {
    throw std::out_of_range("score: index out of range");
  }
  return dot(table.users.row(u), table.items.row(i));
}

std::vector<double> score_all(const EmbeddingTable& table, Index u) {
  if (u >= table.users.rows()) throw std::out_of_range("score_all: user out of range");
  std::vector<double> out(table.items.rows());
  const auto eu = table.users.row(u);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dot(eu, table.items.row(i));
  return out;
}

NormalizedAdjacency::NormalizedAdjacency(const InteractionDataset& ds)
    : num_users_(ds.num_users()) {
  if (ds.train().empty()) throw DataError("cannot build adjacency from an empty train split");
  const std::size_t n = ds.num_users() + ds.num_items();
  row_ptr_.assign(n + 1, 0);
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    if (ds.user_hist(static_cast<Index>(u)).empty()) {
      throw DataError("isolated user " + std::to_string(u) + " in adjacency");
    }
    row_ptr_[u + 1] = ds.user_hist(static_cast<Index>(u)).size();
  }
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    if (ds.item_users(static_cast<Index>(i)).empty()) {
      throw DataError("isolated item " + std::to_string(i) + " in adjacency");
    }
    row_ptr_[num_users_ + i + 1] = ds.item_users(static_cast<Index>(i)).size();
  }
  for (std::size_t r = 0; r < n; ++r) row_ptr_[r + 1] += row_ptr_[r];
  cols_.resize(row_ptr_[n]);
  vals_.resize(row_ptr_[n]);
  auto inv_sqrt = [](std::size_t a, std::size_t b) {
    return 1.0 / std::sqrt(static_cast<double>(a) * static_cast<double>(b));
  };
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto& hist = ds.user_hist(static_cast<Index>(u));
    std::size_t p = row_ptr_[u];
    for (Index i : hist) {
      cols_[p] = static_cast<std::uint32_t>(num_users_ + i);
      vals_[p++] = inv_sqrt(hist.size(), ds.item_users(i).size());
    }
  }
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    const auto& users = ds.item_users(static_cast<Index>(i));
    std::size_t p = row_ptr_[num_users_ + i];
    for (Index u : users) {
      cols_[p] = u;
      vals_[p++] = inv_sqrt(users.size(), ds.user_hist(u).size());
    }
  }
}

double NormalizedAdjacency::entry(std::size_t r, std::size_t c) const {
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

void NormalizedAdjacency::multiply(const Matrix& in, Matrix& out) const {
  if (in.rows() != size()) throw std::invalid_argument("adjacency/table dimension mismatch");
  out = Matrix(in.rows(), in.cols());
  for (std::size_t r = 0; r < size(); ++r) {
    auto dst = out.row(r);
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      axpy(vals_[p], in.row(cols_[p]), dst);
    }
  }
}

namespace {

Matrix stack(const EmbeddingTable& t) {
  Matrix m(t.users.rows() + t.items.rows(), t.dim());
  std::copy(t.users.values().begin(), t.users.values().end(), m.values().begin());
  std::copy(t.items.values().begin(), t.items.values().end(),
            m.values().begin() + static_cast<std::ptrdiff_t>(t.users.values().size()));
  return m;
}

EmbeddingTable unstack(const Matrix& m, std::size_t num_users) {
  EmbeddingTable t{Matrix(num_users, m.cols()), Matrix(m.rows() - num_users, m.cols())};
  const auto split = m.values().begin() + static_cast<std::ptrdiff_t>(num_users * m.cols());
  std::copy(m.values().begin(), split, t.users.values().begin());
  std::copy(split, m.values().end(), t.items.values().begin());
  return t;
}

}  // namespace

EmbeddingTable propagate(const EmbeddingTable& table0, const NormalizedAdjacency& adj,
                         const BackboneConfig& cfg) {
  if (cfg.kind != Backbone::LightGCN) throw std::invalid_argument("propagate requires LightGCN");
  if (table0.users.rows() != adj.num_users() ||
      table0.users.rows() + table0.items.rows() != adj.size()) {
    throw std::invalid_argument("adjacency/table dimension mismatch");
  }
  const auto weights = cfg.resolved_weights();
  Matrix layer = stack(table0);
  Matrix acc = layer;
  scale(weights[0], acc.values());
  Matrix next;
  for (std::size_t k = 1; k < weights.size(); ++k) {
    adj.multiply(layer, next);
    std::swap(layer, next);
    axpy(weights[k], layer.values(), acc.values());
  }
  return unstack(acc, adj.num_users());
}

EmbeddingTable forward(const EmbeddingTable& table0, const NormalizedAdjacency* adj,
                       const BackboneConfig& cfg) {
  if (cfg.kind == Backbone::MF) return table0;
  if (adj == nullptr) throw std::invalid_argument("LightGCN forward needs an adjacency");
  return propagate(table0, *adj, cfg);
}

}  // namespace ddcrec
