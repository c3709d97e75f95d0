#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "pearl/data_model.hpp"
#include "pearl/error.hpp"
#include "pearl/metrics.hpp"
#include "pearl/preprocessing.hpp"

namespace pearl {
namespace {

/// Covariance computed entry by entry, 1/(n-1).
Matrix brute_covariance(const Matrix& x) {
  const Index n = x.rows(), d = x.cols();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < n; ++i) mean[static_cast<std::size_t>(j)] += x(i, j);
    mean[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  }
  Matrix cov(d, d);
  for (Index a = 0; a < d; ++a) {
    for (Index b = 0; b < d; ++b) {
      double s = 0.0;
      for (Index i = 0; i < n; ++i) {
        s += (x(i, a) - mean[static_cast<std::size_t>(a)]) * (x(i, b) - mean[static_cast<std::size_t>(b)]);
      }
      cov(a, b) = s / static_cast<double>(n - 1);
    }
  }
  return cov;
}

TEST(Standardizer, TwoPointCase) {
  Matrix x(2, 2);
  x << 0, 2, 2, 2;
  const auto s = Standardizer::fit(x);
  EXPECT_DOUBLE_EQ(s.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(s.mean(1), 2.0);
  EXPECT_DOUBLE_EQ(s.std(0), 1.0);
  EXPECT_DOUBLE_EQ(s.std(1), 0.0);
  const Matrix z = s.apply(x);
  EXPECT_TRUE(z.allFinite());
  EXPECT_DOUBLE_EQ(z(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(z(1, 1), 0.0);
}

TEST(Standardizer, ApplyToFitDataAndInvert) {
  Rng rng(3);
  Matrix x = oracle::random_matrix(rng, 50, 6, 3.0);
  x.col(2).setConstant(4.0);
  const auto s = Standardizer::fit(x);
  const Matrix z = s.apply(x);
  for (Index j = 0; j < x.cols(); ++j) {
    const double mean = z.col(j).mean();
    const double std = std::sqrt((z.col(j).array() - mean).square().mean());
    EXPECT_NEAR(mean, 0.0, 1e-6);
    if (j != 2) EXPECT_NEAR(std, 1.0, 1e-6);
  }
  const Matrix back = s.invert(z);
  for (Index j = 0; j < x.cols(); ++j) {
    if (j == 2) continue;
    EXPECT_LT((back.col(j) - x.col(j)).cwiseAbs().maxCoeff(), 1e-5);
  }
  EXPECT_THROW(Standardizer::fit(Matrix(0, 3)), Error);
}

TEST(Standardizer, SerializeRoundTrip) {
  Rng rng(4);
  const auto s = Standardizer::fit(oracle::random_matrix(rng, 10, 3));
  const auto bytes = s.serialize();
  EXPECT_EQ(bytes[5], 2);
  const auto back = Standardizer::deserialize(bytes);
  EXPECT_TRUE(back.mean == s.mean);
  EXPECT_TRUE(back.std == s.std);
  EXPECT_THROW(PcaWhitener::deserialize(bytes), LoadError);
}

TEST(L2Normalize, Examples) {
  Matrix x(2, 2);
  x << 3, 4, 0, 0;
  const Matrix y = l2_normalize(x);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.8);
  EXPECT_DOUBLE_EQ(y(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(1, 1), 0.0);
}

TEST(L2Normalize, CosinesUnchanged) {
  Rng rng(5);
  const Matrix x = oracle::random_matrix(rng, 20, 7, 4.0);
  const Matrix y = l2_normalize(x);
  for (Index i = 0; i < x.rows(); ++i) {
    EXPECT_NEAR(y.row(i).norm(), 1.0, 1e-12);
    for (Index j = 0; j < x.rows(); ++j) {
      EXPECT_NEAR(oracle::cosine(x, i, x, j), oracle::cosine(y, i, y, j), 1e-6);
    }
  }
}

TEST(PcaWhitener, CovarianceIsIdentity) {
  Rng rng(6);
  const Matrix mix = oracle::random_matrix(rng, 32, 32);
  const Matrix x = oracle::random_matrix(rng, 500, 32) * mix;
  const auto w = PcaWhitener::fit(x);
  EXPECT_EQ(w.output_dim(), 32);
  const Matrix cov = brute_covariance(w.apply(x));
  EXPECT_LT((cov - Matrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-4);
  const Matrix gram = w.components.transpose() * w.components;
  EXPECT_LT((gram - Matrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-10);
  for (Index i = 1; i < w.eigenvalues.size(); ++i) EXPECT_GE(w.eigenvalues(i - 1), w.eigenvalues(i));
}

TEST(PcaWhitener, IsotropicSpectrumNearOne) {
  Rng rng(7);
  const Matrix x = oracle::random_matrix(rng, 20000, 8);
  const auto w = PcaWhitener::fit(x);
  for (Index i = 0; i < w.eigenvalues.size(); ++i) EXPECT_NEAR(w.eigenvalues(i), 1.0, 0.06);
}

TEST(PcaWhitener, RefitIsIdempotent) {
  Rng rng(8);
  const Matrix x = oracle::random_matrix(rng, 300, 10) * oracle::random_matrix(rng, 10, 10);
  const auto w = PcaWhitener::fit(x);
  const auto again = PcaWhitener::fit(w.apply(x));
  for (Index i = 0; i < again.eigenvalues.size(); ++i) EXPECT_NEAR(again.eigenvalues(i), 1.0, 1e-3);
}

TEST(PcaWhitener, RankDeficientShrinksAndGuards) {
  Rng rng(9);
  const Matrix x = oracle::random_matrix(rng, 40, 3) * oracle::random_matrix(rng, 3, 6);
  EXPECT_EQ(PcaWhitener::fit(x).output_dim(), 3);
  EXPECT_THROW(PcaWhitener::fit(Matrix::Ones(1, 4)), Error);
}

TEST(Lda, TwoClassesMatchClosedForm) {
  Rng rng(10);
  const Index d = 6;
  Matrix x = oracle::random_matrix(rng, 400, d);
  std::vector<int> y(400);
  for (Index i = 0; i < 400; ++i) {
    y[static_cast<std::size_t>(i)] = i < 200 ? 0 : 1;
    x(i, 0) += i < 200 ? 3.0 : -3.0;
  }
  const auto lda = LdaProjector::fit(x, y, 2);
  ASSERT_EQ(lda.projection.cols(), 1);
  const Vector dir = lda.projection.col(0).normalized();
  EXPECT_GT(std::abs(dir(0)), 0.99);

  // Closed form with the same shrinkage: S_w^-1 (mu_0 - mu_1).
  const Vector mu0 = x.topRows(200).colwise().mean().transpose();
  const Vector mu1 = x.bottomRows(200).colwise().mean().transpose();
  Matrix sw = Matrix::Zero(d, d);
  for (Index i = 0; i < 400; ++i) {
    const Vector c = x.row(i).transpose() - (i < 200 ? mu0 : mu1);
    sw += c * c.transpose();
  }
  sw /= 400.0;
  sw = (1.0 - 0.1) * sw + 0.1 * sw.trace() / static_cast<double>(d) * Matrix::Identity(d, d);
  const Vector closed = sw.ldlt().solve(mu0 - mu1).normalized();
  EXPECT_GT(std::abs(closed.dot(dir)), 0.999);
}

TEST(Lda, ColumnCountAndGuards) {
  Rng rng(11);
  const Matrix x = oracle::random_matrix(rng, 60, 5);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 4);
  EXPECT_EQ(LdaProjector::fit(x, y, 4).projection.cols(), 3);
  std::vector<int> single(60, 0);
  EXPECT_THROW(LdaProjector::fit(x, single, 1), Error);
  std::vector<int> missing(60, 0);
  missing[0] = 2;
  EXPECT_THROW(LdaProjector::fit(x, missing, 3), Error);
  const auto lda = LdaProjector::fit(x, y, 4);
  const auto back = LdaProjector::deserialize(lda.serialize());
  EXPECT_TRUE(back.projection == lda.projection);
}

TEST(Lda, SmallBudgetRuns) {
  Rng rng(12);
  const Matrix x = oracle::random_matrix(rng, 10, 32);
  std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  const auto lda = LdaProjector::fit(x, y, 3);
  EXPECT_TRUE(lda.projection.allFinite());
  EXPECT_EQ(lda.projection.cols(), 2);
}

TEST(Lda, ShuffledLabelsStayAtPermutationNull) {
  SyntheticConfig cfg;
  cfg.num_classes = 4;
  cfg.dim = 16;
  cfg.per_class = 100;
  cfg.separation = 3.0;
  cfg.confounder_gamma = 0.0;
  const auto ds = generate_synthetic(cfg);
  const Matrix x = ds.embeddings.to_double();
  std::vector<std::size_t> train, held;
  for (std::size_t i = 0; i < ds.size(); ++i) (i % 2 == 0 ? train : held).push_back(i);
  const auto rows = [&](const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(idx[i]));
    return out;
  };
  const Matrix xt = rows(train), xh = rows(held);
  std::vector<int> yt, yh;
  for (auto i : train) yt.push_back(ds.labels[i]);
  for (auto i : held) yh.push_back(ds.labels[i]);

  const auto true_fit = LdaProjector::fit(xt, yt, 4);
  const double true_sep = separation_delta(l2_normalize(true_fit.apply(xh)), yh).value;

  // Null: labels shuffled over the whole set, so neither split carries signal.
  Rng rng(13);
  std::vector<double> null;
  for (int s = 0; s < 20; ++s) {
    auto all = ds.labels;
    rng.shuffle(std::span(all));
    std::vector<int> st, sh;
    for (auto i : train) st.push_back(all[i]);
    for (auto i : held) sh.push_back(all[i]);
    const auto fit = LdaProjector::fit(xt, st, 4);
    null.push_back(separation_delta(l2_normalize(fit.apply(xh)), sh).value);
  }
  const double mean = std::accumulate(null.begin(), null.end(), 0.0) / 20.0;
  double var = 0.0;
  for (double v : null) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / 19.0) / std::sqrt(20.0);
  EXPECT_LT(mean, 3.0 * se + 0.02);
  EXPECT_GT(true_sep, *std::max_element(null.begin(), null.end()) + 0.1);
}

}  // namespace
}  // namespace pearl
