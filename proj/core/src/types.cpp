#include "pearl/types.hpp"

#include <string>

#include "pearl/error.hpp"

namespace pearl {

EmbeddingMatrix::EmbeddingMatrix(Index n, Index d) {
  if (n < 0 || d < 1) {
    throw InvalidArgument("embedding matrix needs n >= 0 and d >= 1, got n=" + std::to_string(n) +
                          ", d=" + std::to_string(d));
  }
  values_ = FloatMatrix::Zero(n, d);
}

EmbeddingMatrix::EmbeddingMatrix(FloatMatrix values) : values_(std::move(values)) {
  if (values_.cols() < 1) throw InvalidArgument("embedding matrix needs d >= 1");
  for (Index i = 0; i < values_.rows(); ++i) {
    if (!values_.row(i).allFinite()) {
      throw InvalidArgument("non-finite value at row " + std::to_string(i + 1));
    }
  }
}

EmbeddingMatrix EmbeddingMatrix::from_double(const Matrix& values) {
  return EmbeddingMatrix(FloatMatrix(values.cast<float>()));
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const std::size_t> rows) const {
  FloatMatrix out(static_cast<Index>(rows.size()), d());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = values_.row(static_cast<Index>(rows[i]));
  }
  EmbeddingMatrix result;
  result.values_ = std::move(out);
  return result;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.embeddings = embeddings.select_rows(rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(labels.at(r));
  if (!ids.empty()) {
    out.ids.reserve(rows.size());
    for (auto r : rows) out.ids.push_back(ids.at(r));
  }
  out.num_classes = num_classes;
  out.label_names = label_names;
  out.warnings = warnings;
  return out;
}

void LabeledDataset::validate() const {
  if (labels.size() != static_cast<std::size_t>(embeddings.n())) {
    throw InvalidArgument("label count " + std::to_string(labels.size()) + " != row count " +
                          std::to_string(embeddings.n()));
  }
  if (label_names.size() != static_cast<std::size_t>(num_classes)) {
    throw InvalidArgument("label table has " + std::to_string(label_names.size()) +
                          " entries for " + std::to_string(num_classes) + " classes");
  }
  if (!ids.empty() && ids.size() != labels.size()) {
    throw InvalidArgument("id count does not match row count");
  }
  std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y == kUnlabeled) continue;
    if (y < 0 || y >= num_classes) {
      throw InvalidArgument("label " + std::to_string(y) + " at row " + std::to_string(i + 1) +
                            " outside [0, " + std::to_string(num_classes) + ")");
    }
    seen[static_cast<std::size_t>(y)] = true;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw InvalidArgument("class " + std::to_string(c) + " has no rows");
    }
  }
}

}  // namespace pearl
