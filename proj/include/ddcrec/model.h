#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddcrec/dataset.h"
#include "ddcrec/linalg.h"

namespace ddcrec {

struct EmbeddingTable {
  Matrix users;  // num_users x d
  Matrix items;  // num_items x d

  std::size_t dim() const { return users.cols(); }
  bool operator==(const EmbeddingTable&) const = default;
};

enum class Backbone { MF, LightGCN };

std::string to_string(Backbone b);
Backbone parse_backbone(const std::string& name);

struct BackboneConfig {
  Backbone kind = Backbone::MF;
  std::size_t num_layers = 2;
  // Empty means uniform 1/(K+1).
  std::vector<double> layer_weights;

  static BackboneConfig mf() { return {Backbone::MF, 0, {}}; }
  static BackboneConfig lightgcn(std::size_t layers) { return {Backbone::LightGCN, layers, {}}; }

  // Resolved alpha_k for k = 0..K; throws if they do not sum to 1.
  std::vector<double> resolved_weights() const;
};

// N(0, scale^2) entries.
EmbeddingTable init_embeddings(std::size_t num_users, std::size_t num_items, std::size_t dim,
                               std::uint64_t seed, double scale = 0.1);

double score(const EmbeddingTable& table, Index u, Index i);
// Scores of user u against every item.
std::vector<double> score_all(const EmbeddingTable& table, Index u);

// D^{-1/2} A D^{-1/2} over the user-item graph, CSR, users first then items.
class NormalizedAdjacency {
 public:
  explicit NormalizedAdjacency(const InteractionDataset& ds);

  std::size_t size() const { return row_ptr_.size() - 1; }
  std::size_t num_users() const { return num_users_; }
  std::size_t nnz() const { return cols_.size(); }
  // Zero when (r, c) is not an edge.
  double entry(std::size_t r, std::size_t c) const;

  // out = A_hat * in, where in/out stack user rows then item rows.
  void multiply(const Matrix& in, Matrix& out) const;

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::uint32_t>& cols() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }

 private:
  std::size_t num_users_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
};

// sum_k alpha_k A_hat^k E0. The operator is self-adjoint, so the same call maps
// gradients w.r.t. the propagated table back onto E0.
EmbeddingTable propagate(const EmbeddingTable& table0, const NormalizedAdjacency& adj,
                         const BackboneConfig& cfg);

// Final scoring table for either backbone. `adj` may be null for MF.
EmbeddingTable forward(const EmbeddingTable& table0, const NormalizedAdjacency* adj,
                       const BackboneConfig& cfg);

}  // namespace ddcrec
