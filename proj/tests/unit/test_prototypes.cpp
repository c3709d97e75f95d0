#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pearl/error.hpp"
#include "pearl/prototypes.hpp"

namespace pearl {
namespace {

TEST(Prototypes, SymmetricPair) {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  const std::vector<int> y{0, 0};
  const auto p = compute_prototypes(x, y, 1);
  EXPECT_NEAR(p.means(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p.means(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(p.normalized(0, 0), 0.70710678, 1e-8);
  EXPECT_NEAR(p.normalized(0, 1), 0.70710678, 1e-8);
  EXPECT_EQ(p.support, (std::vector<std::size_t>{2}));
}

TEST(Prototypes, SingletonIsNormalizedPoint) {
  Matrix x(2, 3);
  x << 1, 2, 2, 0, -3, 4;
  const std::vector<int> y{1, 0};
  const auto p = compute_prototypes(x, y, 2);
  EXPECT_NEAR(p.normalized(1, 1), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.normalized(0, 2), 0.8, 1e-15);
}

TEST(Prototypes, DegenerateAndEmptyClassErrors) {
  Matrix x(2, 2);
  x << 1, 0, -1, 0;
  const std::vector<int> y{0, 0};
  try {
    compute_prototypes(x, y, 1);
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate prototype"), std::string::npos);
  }
  const std::vector<int> y2{0, 0};
  Matrix ok(2, 2);
  ok << 1, 0, 1, 1;
  try {
    compute_prototypes(ok, y2, 3);
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos) << e.what();
  }
}

TEST(Prototypes, IgnoresUnlabeledRows) {
  Matrix x(3, 2);
  x << 1, 0, 100, 100, 0, 1;
  const std::vector<int> y{0, kUnlabeled, 1};
  const auto p = compute_prototypes(x, y, 2);
  EXPECT_EQ(p.support, (std::vector<std::size_t>{1, 1}));
  EXPECT_NEAR(p.normalized(0, 0), 1.0, 1e-15);
}

TEST(Prototypes, UnitRowsPermutationAndDuplicateInvariance) {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(rng, 40, 5) + Matrix::Constant(40, 5, 0.5);
  const auto y = oracle::random_labels(rng, 40, 3);
  const auto p = compute_prototypes(x, y, 3);
  for (Index c = 0; c < 3; ++c) EXPECT_NEAR(p.normalized.row(c).norm(), 1.0, 1e-6);

  std::vector<std::size_t> order(40);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span(order));
  Matrix xs(40, 5);
  std::vector<int> ys(40);
  for (std::size_t i = 0; i < 40; ++i) {
    xs.row(static_cast<Index>(i)) = x.row(static_cast<Index>(order[i]));
    ys[i] = y[order[i]];
  }
  const auto q = compute_prototypes(xs, ys, 3);
  EXPECT_LT((q.normalized - p.normalized).cwiseAbs().maxCoeff(), 1e-12);

  Matrix xd(41, 5);
  xd.topRows(40) = x;
  xd.row(40) = p.means.row(2);
  auto yd = y;
  yd.push_back(2);
  const auto r = compute_prototypes(xd, yd, 3);
  EXPECT_LT((r.normalized.row(2) - p.normalized.row(2)).cwiseAbs().maxCoeff(), 1e-6);
}

}  // namespace
}  // namespace pearl
