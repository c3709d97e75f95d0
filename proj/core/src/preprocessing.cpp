#include "pearl/preprocessing.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "pearl/container.hpp"
#include "pearl/error.hpp"

namespace pearl {
namespace {

using container::Kind;

void write_vector(container::Writer& out, const Vector& v) { out.f64s({v.data(), static_cast<std::size_t>(v.size())}); }

Vector read_vector(container::Reader& in, Index size) {
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = in.f64();
  return v;
}

void write_matrix(container::Writer& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out.f64(m(i, j));
  }
}

Matrix read_matrix(container::Reader& in, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = in.f64();
  }
  return m;
}

/// Flips each column so its largest-magnitude entry is positive.
void fix_signs(Matrix& columns) {
  for (Index j = 0; j < columns.cols(); ++j) {
    Index arg = 0;
    columns.col(j).cwiseAbs().maxCoeff(&arg);
    if (columns(arg, j) < 0.0) columns.col(j) *= -1.0;
  }
}

void check_width(const Matrix& x, Index expected, const char* what) {
  if (x.cols() != expected) {
    throw InvalidArgument(std::string(what) + ": input has " + std::to_string(x.cols()) +
                          " columns, fitted on " + std::to_string(expected));
  }
}

}  // namespace

Standardizer Standardizer::fit(const Matrix& train) {
  if (train.rows() == 0) throw InvalidArgument("standardizer needs at least one row");
  Standardizer s;
  s.mean = train.colwise().mean().transpose();
  const Matrix centered = train.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt().transpose();
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  check_width(x, mean.size(), "standardizer");
  const RowVector scale = std.cwiseMax(epsilon).cwiseInverse().transpose();
  return (x.rowwise() - mean.transpose()).array().rowwise() * scale.array();
}

Matrix Standardizer::invert(const Matrix& z) const {
  check_width(z, mean.size(), "standardizer");
  const RowVector scale = std.cwiseMax(epsilon).transpose();
  return (z.array().rowwise() * scale.array()).matrix().rowwise() + mean.transpose();
}

std::vector<std::uint8_t> Standardizer::serialize() const {
  container::Writer out;
  out.header(Kind::kStandardizer);
  out.u32(static_cast<std::uint32_t>(mean.size()));
  out.f64(epsilon);
  write_vector(out, mean);
  write_vector(out, std);
  return out.release();
}

Standardizer Standardizer::deserialize(std::span<const std::uint8_t> bytes) {
  container::Reader in(bytes);
  in.expect_header(Kind::kStandardizer);
  Standardizer s;
  const Index d = in.u32();
  s.epsilon = in.f64();
  s.mean = read_vector(in, d);
  s.std = read_vector(in, d);
  in.expect_end();
  return s;
}

Matrix l2_normalize(const Matrix& x) {
  Matrix out = x;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& x) {
  return EmbeddingMatrix::from_double(l2_normalize(x.to_double()));
}

Matrix sample_covariance(const Matrix& x) {
  if (x.rows() < 2) throw InvalidArgument("covariance needs at least two rows");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

PcaWhitener PcaWhitener::fit(const Matrix& train, double eigen_floor) {
  if (train.rows() < 2) throw InvalidArgument("whitening needs at least two rows");
  PcaWhitener w;
  w.eigen_floor = eigen_floor;
  w.mean = train.colwise().mean().transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(sample_covariance(train));
  if (solver.info() != Eigen::Success) throw FitError("covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues; keep those above the floor, largest first.
  const Vector& values = solver.eigenvalues();
  const Index d = values.size();
  Index kept = 0;
  while (kept < d && values(d - 1 - kept) > eigen_floor) ++kept;
  w.eigenvalues.resize(kept);
  w.components.resize(d, kept);
  for (Index k = 0; k < kept; ++k) {
    w.eigenvalues(k) = values(d - 1 - k);
    w.components.col(k) = solver.eigenvectors().col(d - 1 - k);
  }
  fix_signs(w.components);
  return w;
}

Matrix PcaWhitener::apply(const Matrix& x) const {
  check_width(x, mean.size(), "whitener");
  const Vector inv_sqrt = eigenvalues.cwiseMax(eigen_floor).cwiseSqrt().cwiseInverse();
  return ((x.rowwise() - mean.transpose()) * components) * inv_sqrt.asDiagonal();
}

std::vector<std::uint8_t> PcaWhitener::serialize() const {
  container::Writer out;
  out.header(Kind::kWhitener);
  out.u32(static_cast<std::uint32_t>(components.rows()));
  out.u32(static_cast<std::uint32_t>(components.cols()));
  out.f64(eigen_floor);
  write_vector(out, mean);
  write_vector(out, eigenvalues);
  write_matrix(out, components);
  return out.release();
}

PcaWhitener PcaWhitener::deserialize(std::span<const std::uint8_t> bytes) {
  container::Reader in(bytes);
  in.expect_header(Kind::kWhitener);
  PcaWhitener w;
  const Index d = in.u32();
  const Index m = in.u32();
  w.eigen_floor = in.f64();
  w.mean = read_vector(in, d);
  w.eigenvalues = read_vector(in, m);
  w.components = read_matrix(in, d, m);
  in.expect_end();
  return w;
}

namespace {

/// Shrunk within-class scatter, or nullopt when it is not positive definite.
std::optional<Matrix> shrink_scatter(const Matrix& within, double lambda) {
  const Index d = within.rows();
  const double target = within.trace() / static_cast<double>(d);
  Matrix shrunk = (1.0 - lambda) * within;
  shrunk.diagonal().array() += lambda * target;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(shrunk, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) return std::nullopt;
  const double largest = solver.eigenvalues().maxCoeff();
  const double smallest = solver.eigenvalues().minCoeff();
  if (!(largest > 0.0) || smallest <= 1e-12 * largest) return std::nullopt;
  return shrunk;
}

}  // namespace

LdaProjector LdaProjector::fit(const Matrix& train, std::span<const int> labels, int num_classes,
                               double shrinkage_lambda) {
  if (num_classes < 2) throw InvalidArgument("LDA needs at least two classes");
  if (labels.size() != static_cast<std::size_t>(train.rows())) {
    throw InvalidArgument("LDA label count does not match row count");
  }
  if (!(shrinkage_lambda >= 0.0 && shrinkage_lambda <= 1.0)) {
    throw InvalidArgument("LDA shrinkage must lie in [0, 1]");
  }
  const Index d = train.cols();
  const Index k = num_classes - 1;
  if (k > d) {
    throw InvalidArgument("LDA needs dimension >= C-1 (d=" + std::to_string(d) + ", C=" +
                          std::to_string(num_classes) + ")");
  }

  const auto n = static_cast<double>(train.rows());
  Matrix class_means = Matrix::Zero(num_classes, d);
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  for (Index i = 0; i < train.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= num_classes) throw InvalidArgument("LDA label outside [0, C)");
    class_means.row(y) += train.row(i);
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0.0) {
      throw InvalidArgument("LDA class " + std::to_string(c) + " has no training rows");
    }
    class_means.row(c) /= counts[static_cast<std::size_t>(c)];
  }

  LdaProjector p;
  p.mean = train.colwise().mean().transpose();

  Matrix within = Matrix::Zero(d, d);
  for (Index i = 0; i < train.rows(); ++i) {
    const RowVector r = train.row(i) - class_means.row(labels[static_cast<std::size_t>(i)]);
    within.noalias() += r.transpose() * r;
  }
  within /= n;
  Matrix between = Matrix::Zero(d, d);
  for (int c = 0; c < num_classes; ++c) {
    const RowVector r = class_means.row(c) - p.mean.transpose();
    between.noalias() += (counts[static_cast<std::size_t>(c)] / n) * (r.transpose() * r);
  }

  p.shrinkage_lambda = shrinkage_lambda;
  auto shrunk = shrink_scatter(within, shrinkage_lambda);
  if (!shrunk && shrinkage_lambda < kEscalatedShrinkage) {
    p.shrinkage_lambda = kEscalatedShrinkage;
    shrunk = shrink_scatter(within, kEscalatedShrinkage);
  }
  if (!shrunk) throw FitError("LDA within-class scatter is singular after shrinkage");

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(between, *shrunk, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) throw FitError("LDA generalized eigendecomposition failed");

  p.projection.resize(d, k);
  for (Index j = 0; j < k; ++j) p.projection.col(j) = solver.eigenvectors().col(d - 1 - j);
  if (!p.projection.allFinite()) throw FitError("LDA produced non-finite directions");
  fix_signs(p.projection);
  return p;
}

Matrix LdaProjector::apply(const Matrix& x) const {
  check_width(x, mean.size(), "LDA projector");
  return (x.rowwise() - mean.transpose()) * projection;
}

std::vector<std::uint8_t> LdaProjector::serialize() const {
  container::Writer out;
  out.header(Kind::kLda);
  out.u32(static_cast<std::uint32_t>(projection.rows()));
  out.u32(static_cast<std::uint32_t>(projection.cols()));
  out.f64(shrinkage_lambda);
  write_vector(out, mean);
  write_matrix(out, projection);
  return out.release();
}

LdaProjector LdaProjector::deserialize(std::span<const std::uint8_t> bytes) {
  container::Reader in(bytes);
  in.expect_header(Kind::kLda);
  LdaProjector p;
  const Index d = in.u32();
  const Index k = in.u32();
  p.shrinkage_lambda = in.f64();
  p.mean = read_vector(in, d);
  p.projection = read_matrix(in, d, k);
  in.expect_end();
  return p;
}

}  // namespace pearl
