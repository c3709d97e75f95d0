#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pearl/types.hpp"

namespace pearl {

/// Per-dimension z-score scaler. Uses the population (1/n) standard
/// deviation; dimensions with std below epsilon are divided by epsilon.
struct Standardizer {
  Vector mean;
  Vector std;
  double epsilon = 1e-8;

  static Standardizer fit(const Matrix& train);
  Matrix apply(const Matrix& x) const;
  /// Inverse of apply on dimensions whose std exceeds epsilon.
  Matrix invert(const Matrix& z) const;

  std::vector<std::uint8_t> serialize() const;
  static Standardizer deserialize(std::span<const std::uint8_t> bytes);
};

/// Scales every nonzero row to unit Euclidean norm; zero rows stay zero.
Matrix l2_normalize(const Matrix& x);
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& x);

/// PCA whitening: (x - mean) * components * diag(1/sqrt(lambda)). Only
/// eigenvalues above eigen_floor are kept, so the output width m may be
/// smaller than d on rank-deficient data.
struct PcaWhitener {
  Vector mean;
  Matrix components;  // d x m, orthonormal columns
  Vector eigenvalues;  // m, descending
  double eigen_floor = 1e-8;

  /// Fits on the sample covariance (1/(n-1)); needs n >= 2.
  static PcaWhitener fit(const Matrix& train, double eigen_floor = 1e-8);
  Matrix apply(const Matrix& x) const;
  Index output_dim() const { return components.cols(); }

  std::vector<std::uint8_t> serialize() const;
  static PcaWhitener deserialize(std::span<const std::uint8_t> bytes);
};

/// Fisher LDA with covariance shrinkage toward a scaled identity:
///   S_w <- (1 - lambda) S_w + lambda * trace(S_w)/d * I
/// Directions are the top C-1 generalized eigenvectors of (S_b, S_w).
struct LdaProjector {
  Vector mean;  // training mean, subtracted before projecting
  Matrix projection;  // d x (C-1)
  double shrinkage_lambda = 0.1;

  static constexpr double kDefaultShrinkage = 0.1;
  static constexpr double kEscalatedShrinkage = 0.5;

  /// Labels must lie in [0, num_classes) with every class present. If the
  /// shrunk S_w is still singular, retries once with lambda = 0.5.
  static LdaProjector fit(const Matrix& train, std::span<const int> labels, int num_classes,
                          double shrinkage_lambda = kDefaultShrinkage);
  Matrix apply(const Matrix& x) const;

  std::vector<std::uint8_t> serialize() const;
  static LdaProjector deserialize(std::span<const std::uint8_t> bytes);
};

/// Sample covariance with 1/(n-1) normalization.
Matrix sample_covariance(const Matrix& x);

}  // namespace pearl
