#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pearl {

using Index = Eigen::Index;

/// Working-precision matrix used by every numerical routine.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Storage-precision, row-major matrix backing EmbeddingMatrix.
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Label value marking an unlabeled row.
inline constexpr int kUnlabeled = -1;

/// n x d matrix of 32-bit floats, one embedding per row. Entries are always
/// finite and d >= 1, including when n == 0.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() : values_(0, 1) {}
  EmbeddingMatrix(Index n, Index d);
  explicit EmbeddingMatrix(FloatMatrix values);

  /// Rounds a working-precision matrix to storage precision.
  static EmbeddingMatrix from_double(const Matrix& values);

  Index n() const { return values_.rows(); }
  Index d() const { return values_.cols(); }
  bool empty() const { return n() == 0; }

  const FloatMatrix& values() const { return values_; }
  std::span<const float> row(Index i) const {
    return {values_.data() + i * d(), static_cast<std::size_t>(d())};
  }
  std::span<const float> data() const {
    return {values_.data(), static_cast<std::size_t>(values_.size())};
  }

  Matrix to_double() const { return values_.cast<double>(); }

  /// Rows `rows` in the given order.
  EmbeddingMatrix select_rows(std::span<const std::size_t> rows) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
  }

 private:
  FloatMatrix values_;
};

/// Embeddings plus dense class ids in [0, num_classes). Rows may carry
/// kUnlabeled; every labeled class id occurs at least once.
struct LabeledDataset {
  EmbeddingMatrix embeddings;
  std::vector<int> labels;
  int num_classes = 0;

  /// Original label spelling per dense class id, for reports and round trips.
  std::vector<std::string> label_names;
  /// Per-row identifiers (CSV `id` column); empty when the source had none.
  std::vector<std::string> ids;
  /// Non-fatal notes recorded while building the dataset.
  std::vector<std::string> warnings;

  Index size() const { return embeddings.n(); }
  Index dim() const { return embeddings.d(); }

  /// Row subset; keeps the class space and label names of the parent.
  LabeledDataset subset(std::span<const std::size_t> rows) const;

  /// Throws InvalidArgument if any invariant is broken.
  void validate() const;
};

}  // namespace pearl
