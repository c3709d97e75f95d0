#include "pearl/prototypes.hpp"

#include <string>

#include "pearl/error.hpp"

namespace pearl {

PrototypeSet compute_prototypes(const Matrix& x, std::span<const int> labels, int num_classes) {
  if (labels.size() != static_cast<std::size_t>(x.rows())) {
    throw InvalidArgument("prototype label count does not match row count");
  }
  if (num_classes < 1) throw InvalidArgument("prototypes need at least one class");

  PrototypeSet set;
  set.means = Matrix::Zero(num_classes, x.cols());
  set.support.assign(static_cast<std::size_t>(num_classes), 0);
  for (Index i = 0; i < x.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == kUnlabeled) continue;
    if (y < 0 || y >= num_classes) throw InvalidArgument("prototype label outside [0, C)");
    set.means.row(y) += x.row(i);
    ++set.support[static_cast<std::size_t>(y)];
  }

  set.normalized.resize(num_classes, x.cols());
  for (int c = 0; c < num_classes; ++c) {
    const auto count = set.support[static_cast<std::size_t>(c)];
    if (count == 0) throw FitError("class " + std::to_string(c) + " has no labeled rows");
    set.means.row(c) /= static_cast<double>(count);
    const double norm = set.means.row(c).norm();
    if (norm < kDegeneratePrototypeNorm) {
      throw FitError("degenerate prototype for class " + std::to_string(c));
    }
    set.normalized.row(c) = set.means.row(c) / norm;
  }
  return set;
}

PrototypeSet compute_prototypes(const LabeledDataset& labeled) {
  return compute_prototypes(labeled.embeddings.to_double(), labeled.labels, labeled.num_classes);
}

}  // namespace pearl
