#pragma once

#include <span>
#include <vector>

#include "pearl/types.hpp"

namespace pearl {

/// Per-class mean embeddings (`means`) and their unit-norm versions
/// (`normalized`), one row per class.
struct PrototypeSet {
  Matrix means;
  Matrix normalized;
  std::vector<std::size_t> support;

  int num_classes() const { return static_cast<int>(normalized.rows()); }
  Index dim() const { return normalized.cols(); }
};

/// Prototype norms below this are rejected as degenerate.
inline constexpr double kDegeneratePrototypeNorm = 1e-12;

/// Rows labeled kUnlabeled are ignored. Throws FitError for a class with no
/// rows or a mean whose norm is below kDegeneratePrototypeNorm.
PrototypeSet compute_prototypes(const Matrix& x, std::span<const int> labels, int num_classes);
PrototypeSet compute_prototypes(const LabeledDataset& labeled);

}  // namespace pearl
