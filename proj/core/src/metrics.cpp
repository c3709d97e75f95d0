#include "pearl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pearl/error.hpp"

namespace pearl {
namespace {

constexpr Index kQueryBlock = 256;

Matrix unit_rows(const Matrix& x) {
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm >= kCosineZeroNorm) out.row(i) = x.row(i) / norm;
  }
  return out;
}

void check_cutoff(const NeighborList& neighbors, std::span<const int> query_labels, Index k) {
  if (k < 1 || k > neighbors.k) {
    throw InvalidArgument("cutoff " + std::to_string(k) + " outside [1, " + std::to_string(neighbors.k) + "]");
  }
  if (query_labels.size() != static_cast<std::size_t>(neighbors.num_queries)) {
    throw InvalidArgument("query label count does not match neighbor list");
  }
}

template <typename PerQuery>
double mean_over_queries(const NeighborList& neighbors, PerQuery&& per_query) {
  if (neighbors.num_queries == 0) return 0.0;
  double sum = 0.0;
  for (Index q = 0; q < neighbors.num_queries; ++q) sum += per_query(q);
  return sum / static_cast<double>(neighbors.num_queries);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine of vectors with different lengths");
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  if (na < kCosineZeroNorm || nb < kCosineZeroNorm) return 0.0;
  return dot / (na * nb);
}

NeighborList top_k_neighbors(const Matrix& queries, const Matrix& pool, Index k, bool leave_one_out) {
  if (queries.cols() != pool.cols()) throw InvalidArgument("query and pool dimensions differ");
  if (leave_one_out && queries.rows() != pool.rows()) {
    throw InvalidArgument("leave-one-out needs queries and pool to be the same set");
  }
  const Index available = pool.rows() - (leave_one_out ? 1 : 0);
  if (k < 1 || k > available) {
    throw InvalidArgument("k=" + std::to_string(k) + " exceeds pool size " + std::to_string(available));
  }

  const Matrix pool_unit = unit_rows(pool);
  NeighborList out;
  out.num_queries = queries.rows();
  out.k = k;
  out.indices.resize(static_cast<std::size_t>(out.num_queries * k));
  out.similarities.resize(out.indices.size());

  std::vector<Index> candidates;
  for (Index start = 0; start < queries.rows(); start += kQueryBlock) {
    const Index rows = std::min(kQueryBlock, queries.rows() - start);
    const Matrix sims = unit_rows(queries.middleRows(start, rows)) * pool_unit.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index q = start + r;
      candidates.clear();
      for (Index j = 0; j < pool.rows(); ++j) {
        if (!(leave_one_out && j == q)) candidates.push_back(j);
      }
      const auto better = [&](Index a, Index b) {
        const double sa = sims(r, a);
        const double sb = sims(r, b);
        return sa > sb || (sa == sb && a < b);
      };
      std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(), better);
      for (Index j = 0; j < k; ++j) {
        const auto slot = static_cast<std::size_t>(q * k + j);
        out.indices[slot] = candidates[static_cast<std::size_t>(j)];
        out.similarities[slot] = sims(r, candidates[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

MetricValue purity_at_k(const NeighborList& neighbors, std::span<const int> query_labels,
                        std::span<const int> pool_labels, Index k) {
  check_cutoff(neighbors, query_labels, k);
  const double value = mean_over_queries(neighbors, [&](Index q) {
    const auto ids = neighbors.neighbors_of(q);
    Index same = 0;
    for (Index j = 0; j < k; ++j) {
      same += pool_labels[static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])] == query_labels[static_cast<std::size_t>(q)];
    }
    return static_cast<double>(same) / static_cast<double>(k);
  });
  return {"purity", static_cast<int>(k), value};
}

namespace {

/// 1-indexed rank of the first same-label neighbor within the top k, or 0.
Index first_hit(const NeighborList& neighbors, std::span<const int> query_labels,
                std::span<const int> pool_labels, Index q, Index k) {
  const auto ids = neighbors.neighbors_of(q);
  for (Index j = 0; j < k; ++j) {
    if (pool_labels[static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])] == query_labels[static_cast<std::size_t>(q)]) {
      return j + 1;
    }
  }
  return 0;
}

}  // namespace

MetricValue hit_at_k(const NeighborList& neighbors, std::span<const int> query_labels,
                     std::span<const int> pool_labels, Index k) {
  check_cutoff(neighbors, query_labels, k);
  const double value = mean_over_queries(neighbors, [&](Index q) {
    return first_hit(neighbors, query_labels, pool_labels, q, k) > 0 ? 1.0 : 0.0;
  });
  return {"hit", static_cast<int>(k), value};
}

MetricValue mrr_at_k(const NeighborList& neighbors, std::span<const int> query_labels,
                     std::span<const int> pool_labels, Index k) {
  check_cutoff(neighbors, query_labels, k);
  const double value = mean_over_queries(neighbors, [&](Index q) {
    const Index rank = first_hit(neighbors, query_labels, pool_labels, q, k);
    return rank > 0 ? 1.0 / static_cast<double>(rank) : 0.0;
  });
  return {"mrr", static_cast<int>(k), value};
}

MetricValue separation_delta(const Matrix& x, std::span<const int> labels) {
  if (labels.size() != static_cast<std::size_t>(x.rows())) {
    throw InvalidArgument("label count does not match row count");
  }
  const Matrix unit = unit_rows(x);
  double intra = 0.0, inter = 0.0;
  std::size_t intra_pairs = 0, inter_pairs = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    const int yi = labels[static_cast<std::size_t>(i)];
    if (yi == kUnlabeled) continue;
    const Vector sims = unit.bottomRows(x.rows() - i - 1) * unit.row(i).transpose();
    for (Index j = i + 1; j < x.rows(); ++j) {
      const int yj = labels[static_cast<std::size_t>(j)];
      if (yj == kUnlabeled) continue;
      const double s = sims(j - i - 1);
      if (yi == yj) {
        intra += s;
        ++intra_pairs;
      } else {
        inter += s;
        ++inter_pairs;
      }
    }
  }
  if (intra_pairs == 0 || inter_pairs == 0) {
    throw InvalidArgument("separation needs at least one same-label and one different-label pair");
  }
  return {"delta_sep", 0, intra / static_cast<double>(intra_pairs) - inter / static_cast<double>(inter_pairs)};
}

std::vector<int> knn_predict(const NeighborList& neighbors, std::span<const int> pool_labels, Index k,
                             Weighting weighting) {
  if (k < 1 || k > neighbors.k) throw InvalidArgument("cutoff outside the neighbor list");
  int max_label = -1;
  for (int y : pool_labels) max_label = std::max(max_label, y);
  std::vector<double> votes(static_cast<std::size_t>(max_label + 1));
  std::vector<bool> present(votes.size());

  std::vector<int> predicted(static_cast<std::size_t>(neighbors.num_queries));
  for (Index q = 0; q < neighbors.num_queries; ++q) {
    std::fill(votes.begin(), votes.end(), 0.0);
    std::fill(present.begin(), present.end(), false);
    const auto ids = neighbors.neighbors_of(q);
    const auto sims = neighbors.similarities_of(q);
    for (Index j = 0; j < k; ++j) {
      const auto y = static_cast<std::size_t>(pool_labels[static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])]);
      present[y] = true;
      votes[y] += weighting == Weighting::kUniform ? 1.0 : std::max(sims[static_cast<std::size_t>(j)], 0.0);
    }
    int best = -1;
    for (std::size_t c = 0; c < votes.size(); ++c) {
      if (present[c] && (best < 0 || votes[c] > votes[static_cast<std::size_t>(best)])) best = static_cast<int>(c);
    }
    predicted[static_cast<std::size_t>(q)] = best;
  }
  return predicted;
}

MetricValue f1_per_class(std::span<const int> predicted, std::span<const int> actual, int class_id) {
  if (predicted.size() != actual.size()) throw InvalidArgument("prediction and label counts differ");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == class_id;
    const bool a = actual[i] == class_id;
    tp += p && a;
    fp += p && !a;
    fn += !p && a;
  }
  const double precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return {"f1", 0, f1};
}

}  // namespace pearl
