#pragma once

#include <span>
#include <string>
#include <vector>

#include "pearl/types.hpp"

namespace pearl {

/// Norms below this make a cosine similarity 0.
inline constexpr double kCosineZeroNorm = 1e-12;

/// a.b / (|a| |b|), or 0 when either norm is below kCosineZeroNorm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Ranked neighbors per query: similarity descending, ties by ascending
/// pool index.
struct NeighborList {
  Index num_queries = 0;
  Index k = 0;
  std::vector<Index> indices;  // num_queries x k, row-major
  std::vector<double> similarities;

  std::span<const Index> neighbors_of(Index query) const {
    return {indices.data() + query * k, static_cast<std::size_t>(k)};
  }
  std::span<const double> similarities_of(Index query) const {
    return {similarities.data() + query * k, static_cast<std::size_t>(k)};
  }
};

/// Exact cosine k-NN. With leave_one_out, queries and pool are the same set
/// and each query's own row is skipped.
NeighborList top_k_neighbors(const Matrix& queries, const Matrix& pool, Index k, bool leave_one_out = false);

struct MetricValue {
  std::string name;
  int k = 0;  // 0 when the metric has no cutoff
  double value = 0.0;
};

/// Mean over queries of the fraction of the top-k neighbors sharing the
/// query label.
MetricValue purity_at_k(const NeighborList& neighbors, std::span<const int> query_labels,
                        std::span<const int> pool_labels, Index k);

/// Fraction of queries with at least one same-label neighbor in the top k.
MetricValue hit_at_k(const NeighborList& neighbors, std::span<const int> query_labels,
                     std::span<const int> pool_labels, Index k);

/// Mean of 1/rank of the first same-label neighbor, 0 when none is in the top k.
MetricValue mrr_at_k(const NeighborList& neighbors, std::span<const int> query_labels,
                     std::span<const int> pool_labels, Index k);

/// Mean cosine over same-label pairs minus mean cosine over different-label
/// pairs (unordered, i != j). Unlabeled rows are skipped.
MetricValue separation_delta(const Matrix& x, std::span<const int> labels);

enum class Weighting { kUniform, kDistance };

/// Majority vote over the top-k neighbors. Distance weighting sums
/// max(similarity, 0) per label. Ties go to the smallest class id among the
/// voting labels.
std::vector<int> knn_predict(const NeighborList& neighbors, std::span<const int> pool_labels, Index k,
                             Weighting weighting);

/// One-vs-rest F1 for `class_id`; 0 when precision + recall is 0.
MetricValue f1_per_class(std::span<const int> predicted, std::span<const int> actual, int class_id);

}  // namespace pearl
