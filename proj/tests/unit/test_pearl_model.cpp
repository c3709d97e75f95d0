#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "pearl/data_model.hpp"
#include "pearl/pearl_model.hpp"
#include "pearl/preprocessing.hpp"

namespace pearl {
namespace {

PearlConfig tiny_config(std::uint64_t seed) {
  PearlConfig cfg;
  cfg.d_s = 3;
  cfg.d_r = 2;
  cfg.hidden = 4;
  cfg.seed = seed;
  return cfg;
}

struct TinyProblem {
  PearlConfig cfg;
  PearlParams params;
  Matrix batch;
  std::vector<int> labels;
  PrototypeSet prototypes;
};

TinyProblem tiny_problem(std::uint64_t seed) {
  Rng rng(seed + 1000);
  TinyProblem p;
  p.cfg = tiny_config(seed).resolved(5);
  p.params = init_params(p.cfg, 5, 2);
  oracle::randomize_biases(p.params, rng);
  p.batch = oracle::random_matrix(rng, 3, 5);
  p.labels = {0, 1, static_cast<int>(rng.below(2))};
  p.prototypes = oracle::random_prototypes(rng, 2, 5);
  return p;
}

TEST(PearlConfigTest, ResolvesDefaultWidths) {
  const auto cfg = PearlConfig{}.resolved(7);
  EXPECT_EQ(cfg.hidden, 7);
  EXPECT_EQ(cfg.d_s, 4);
  EXPECT_EQ(cfg.d_r, 2);
}

TEST(PearlConfigTest, RejectsBadValues) {
  PearlConfig cfg;
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.w_align = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(InitParams, DeterministicWithZeroBiasesAndShapes) {
  const auto cfg = tiny_config(3).resolved(5);
  const auto a = init_params(cfg, 5, 2);
  const auto b = init_params(cfg, 5, 2);
  EXPECT_TRUE(a == b);
  for (const auto* layer : a.layers()) {
    EXPECT_TRUE(layer->bias.isZero(0.0));
    const double bound = std::sqrt(6.0 / static_cast<double>(layer->fan_in() + layer->fan_out()));
    EXPECT_LE(layer->weight.cwiseAbs().maxCoeff(), bound);
  }
  EXPECT_EQ(a.signal_encoder.hidden.weight.rows(), 5);
  EXPECT_EQ(a.signal_encoder.hidden.weight.cols(), 4);
  EXPECT_EQ(a.signal_encoder.output.weight.cols(), 3);
  EXPECT_EQ(a.residual_encoder.output.weight.cols(), 2);
  EXPECT_EQ(a.signal_decoder.hidden.weight.rows(), 3);
  EXPECT_EQ(a.signal_decoder.output.weight.cols(), 5);
  EXPECT_EQ(a.full_decoder.hidden.weight.rows(), 5);
  EXPECT_EQ(a.projection.weight.rows(), 3);
  EXPECT_EQ(a.projection.weight.cols(), 5);
  EXPECT_EQ(a.classifier.weight.cols(), 2);
  auto cfg2 = cfg;
  cfg2.seed = 4;
  EXPECT_FALSE(init_params(cfg2, 5, 2) == a);
}

TEST(Forward, ZeroWeightsGiveZeroOutputs) {
  auto params = init_params(tiny_config(0).resolved(5), 5, 2).zeros_like();
  Rng rng(1);
  const auto fwd = forward(params, oracle::random_matrix(rng, 4, 5));
  EXPECT_TRUE(fwd.x_tilde.isZero(0.0));
  EXPECT_TRUE(fwd.logits.isZero(0.0));
  EXPECT_TRUE(fwd.proj_out.isZero(0.0));
}

TEST(Forward, ShapesForOneRowAndUnitProjections) {
  const auto params = init_params(tiny_config(0).resolved(5), 5, 2);
  Rng rng(2);
  const auto fwd = forward(params, oracle::random_matrix(rng, 1, 5));
  EXPECT_EQ(fwd.z_s.rows(), 1);
  EXPECT_EQ(fwd.z_s.cols(), 3);
  EXPECT_EQ(fwd.z_r.cols(), 2);
  EXPECT_EQ(fwd.x_tilde.cols(), 5);
  EXPECT_EQ(fwd.x_hat_full.cols(), 5);
  EXPECT_EQ(fwd.proj_out.cols(), 5);
  EXPECT_EQ(fwd.logits.cols(), 2);
  const auto many = forward(params, oracle::random_matrix(rng, 20, 5));
  for (Index i = 0; i < many.proj_out.rows(); ++i) EXPECT_NEAR(many.proj_out.row(i).norm(), 1.0, 1e-6);
}

TEST(Forward, NonFiniteInputThrows) {
  const auto params = init_params(tiny_config(0).resolved(5), 5, 2);
  Matrix batch = Matrix::Zero(2, 5);
  batch(1, 2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward(params, batch), NumericalError);
}

/// A forward pass whose projection rows are set by hand.
ForwardPass with_projection(const Matrix& proj, Index d_s, Index d_r, Index num_classes) {
  ForwardPass f;
  const Index b = proj.rows();
  f.z_s = Matrix::Zero(b, d_s);
  f.z_r = Matrix::Zero(b, d_r);
  f.x_tilde = Matrix::Zero(b, proj.cols());
  f.x_hat_full = Matrix::Zero(b, proj.cols());
  f.proj_out = proj;
  f.logits = Matrix::Zero(b, num_classes);
  return f;
}

TEST(LossTerms, AlignBounds) {
  PrototypeSet protos;
  protos.normalized = Matrix::Identity(2, 2);
  protos.means = protos.normalized;
  Matrix proj(2, 2);
  proj << 1, 0, -1, 0;
  const std::vector<int> y{0, 0};
  const auto t = loss_terms(with_projection(proj, 1, 1, 2), Matrix::Zero(2, 2), y, protos, PearlConfig{});
  EXPECT_NEAR(t.align, 1.0, 1e-12);  // (0 + 2) / 2
}

TEST(LossTerms, ContrastUniformIsLogC) {
  for (int c : {2, 4, 10}) {
    PrototypeSet protos;
    protos.normalized = Matrix::Zero(c, c + 1);
    for (int i = 0; i < c; ++i) protos.normalized(i, i) = 1.0;
    protos.means = protos.normalized;
    Matrix proj = Matrix::Zero(3, c + 1);
    proj.col(c).setOnes();  // orthogonal to every prototype
    const std::vector<int> y{0, 1, c - 1};
    const auto t = loss_terms(with_projection(proj, 1, 1, c), Matrix::Zero(3, c + 1), y, protos, PearlConfig{});
    EXPECT_NEAR(t.contrast, std::log(static_cast<double>(c)), 1e-9);
  }
}

TEST(LossTerms, ContrastTwoClassClosedForm) {
  PrototypeSet protos;
  protos.normalized = Matrix::Identity(2, 2);
  protos.means = protos.normalized;
  Matrix proj(1, 2);
  proj << 1, 0;
  const std::vector<int> y{0};
  const auto t = loss_terms(with_projection(proj, 1, 1, 2), Matrix::Zero(1, 2), y, protos, PearlConfig{});
  EXPECT_NEAR(t.contrast, std::log1p(std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(t.contrast, 4.5399e-5, 1e-9);
}

TEST(LossTerms, OrthoCancellation) {
  PrototypeSet protos;
  protos.normalized = Matrix::Identity(2, 2);
  protos.means = protos.normalized;
  auto f = with_projection(Matrix::Identity(2, 2), 1, 1, 2);
  f.z_s << 1, 1;
  f.z_r << 1, -1;
  const std::vector<int> y{0, 1};
  EXPECT_NEAR(loss_terms(f, Matrix::Zero(2, 2), y, protos, PearlConfig{}).ortho, 0.0, 1e-15);
}

TEST(LossTerms, BoundsOnRandomInputs) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto p = tiny_problem(s);
    const auto t = loss_terms(forward(p.params, p.batch), p.batch, p.labels, p.prototypes, p.cfg);
    EXPECT_GE(t.align, 0.0);
    EXPECT_LE(t.align, 2.0);
    EXPECT_GE(t.contrast, 0.0);
    EXPECT_GE(t.ortho, 0.0);
    EXPECT_LE(t.ortho, 1.0);
    const double total = p.cfg.w_recon * t.recon + p.cfg.w_full * t.full + p.cfg.w_align * t.align +
                         p.cfg.w_contrast * t.contrast + p.cfg.w_cls * t.cls + p.cfg.w_ortho * t.ortho;
    EXPECT_NEAR(t.total, total, 1e-12);
  }
}

TEST(Gradients, MatchFiniteDifferencesAllTerms) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = tiny_problem(s);
    const auto check = oracle::finite_difference_check(p.params, p.cfg, p.batch, p.labels, p.prototypes);
    EXPECT_EQ(check.checked, static_cast<std::size_t>(p.params.size()));
    EXPECT_LT(check.max_rel_error, 1e-4) << "seed " << s;
  }
}

TEST(Gradients, MatchFiniteDifferencesEachTermAlone) {
  for (int term = 0; term < 6; ++term) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      auto p = tiny_problem(100 + s);
      double* weights[] = {&p.cfg.w_recon, &p.cfg.w_full, &p.cfg.w_align,
                           &p.cfg.w_contrast, &p.cfg.w_cls, &p.cfg.w_ortho};
      for (int i = 0; i < 6; ++i) *weights[i] = i == term ? 1.0 : 0.0;
      const auto check = oracle::finite_difference_check(p.params, p.cfg, p.batch, p.labels, p.prototypes);
      EXPECT_LT(check.max_rel_error, 1e-4) << "term " << term << " seed " << s;
    }
  }
}

TEST(Gradients, ZeroWeightsGiveZeroGradient) {
  auto p = tiny_problem(7);
  p.cfg.w_recon = p.cfg.w_full = p.cfg.w_align = p.cfg.w_contrast = p.cfg.w_cls = p.cfg.w_ortho = 0.0;
  const auto g = compute_gradients(p.params, p.cfg, p.batch, p.labels, p.prototypes).gradient;
  EXPECT_TRUE(g == p.params.zeros_like());
}

TEST(Gradients, ReconMinimumGivesZero) {
  auto p = tiny_problem(8);
  p.cfg.w_full = p.cfg.w_align = p.cfg.w_contrast = p.cfg.w_cls = p.cfg.w_ortho = 0.0;
  p.params = p.params.zeros_like();  // D_s(E_s(x)) = 0 = x for a zero batch
  const Matrix zero = Matrix::Zero(3, 5);
  const auto g = compute_gradients(p.params, p.cfg, zero, p.labels, p.prototypes).gradient;
  for (const auto* layer : g.layers()) {
    EXPECT_TRUE(layer->weight.isZero(0.0));
    EXPECT_TRUE(layer->bias.isZero(0.0));
  }
}

struct SyntheticSplit {
  Matrix train_x, val_x;
  std::vector<int> train_y, val_y;
  PrototypeSet prototypes;
};

SyntheticSplit synthetic_split(std::size_t budget, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.per_class = 60;
  sc.seed = seed;
  const auto ds = generate_synthetic(sc);
  std::vector<std::size_t> rows(ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto sample = sample_label_budget(ds, rows, budget, seed);
  SyntheticSplit s;
  const auto tr = ds.subset(sample.train_indices);
  const auto va = ds.subset(sample.val_indices);
  const auto scaler = Standardizer::fit(tr.embeddings.to_double());
  s.train_x = scaler.apply(tr.embeddings.to_double());
  s.val_x = scaler.apply(va.embeddings.to_double());
  s.train_y = tr.labels;
  s.val_y = va.labels;
  s.prototypes = compute_prototypes(s.train_x, s.train_y, ds.num_classes);
  return s;
}

TEST(Train, PatienceZeroRunsOneEpoch) {
  const auto s = synthetic_split(100, 1);
  PearlConfig cfg;
  cfg.patience = 0;
  const auto r = train(cfg, s.train_x, s.train_y, s.val_x, s.val_y, s.prototypes);
  EXPECT_EQ(r.trace.epochs.size(), 1u);
  EXPECT_EQ(r.trace.best_epoch, 0);
}

TEST(Train, ReturnsBestSnapshotAndReducesLoss) {
  const auto s = synthetic_split(200, 2);
  PearlConfig cfg;
  cfg.max_epochs = 60;
  const auto r = train(cfg, s.train_x, s.train_y, s.val_x, s.val_y, s.prototypes);
  ASSERT_FALSE(r.trace.epochs.empty());
  double min_val = r.trace.epochs.front().val_total;
  for (const auto& e : r.trace.epochs) min_val = std::min(min_val, e.val_total);
  EXPECT_EQ(r.trace.best_val_total, min_val);
  const double returned_val = oracle::total_loss(r.params, r.config, s.val_x, s.val_y, s.prototypes);
  EXPECT_NEAR(returned_val, min_val, 1e-9 * std::max(1.0, min_val));
  for (const auto& e : r.trace.epochs) EXPECT_LE(returned_val, e.val_total + 1e-9);
  EXPECT_LT(r.trace.epochs.back().train.total, r.trace.initial_train.total);
  EXPECT_TRUE(r.trace.stop_reason == "patience" || r.trace.stop_reason == "max_epochs");
}

TEST(Train, ValidationLabelsDoNotAffectUpdates) {
  const auto s = synthetic_split(100, 3);
  PearlConfig cfg;
  cfg.max_epochs = 5;
  cfg.patience = 100;
  auto permuted = s.val_y;
  std::rotate(permuted.begin(), permuted.begin() + 1, permuted.end());
  const auto a = train(cfg, s.train_x, s.train_y, s.val_x, s.val_y, s.prototypes);
  const auto b = train(cfg, s.train_x, s.train_y, s.val_x, permuted, s.prototypes);
  ASSERT_EQ(a.trace.epochs.size(), b.trace.epochs.size());
  for (std::size_t e = 0; e < a.trace.epochs.size(); ++e) {
    EXPECT_EQ(a.trace.epochs[e].train.total, b.trace.epochs[e].train.total);
  }
}

TEST(Train, DeterministicGivenSeed) {
  const auto s = synthetic_split(100, 4);
  PearlConfig cfg;
  cfg.max_epochs = 10;
  const auto a = train(cfg, s.train_x, s.train_y, s.val_x, s.val_y, s.prototypes);
  const auto b = train(cfg, s.train_x, s.train_y, s.val_x, s.val_y, s.prototypes);
  EXPECT_TRUE(a.params == b.params);
}

TEST(Transform, PreservesShapeAndIsDeterministic) {
  for (Index d : {2, 5, 17}) {
    const auto params = init_params(PearlConfig{}.resolved(d), d, 3);
    Rng rng(static_cast<std::uint64_t>(d));
    const Matrix x = oracle::random_matrix(rng, 6, d);
    const Matrix a = transform(params, x);
    EXPECT_EQ(a.rows(), 6);
    EXPECT_EQ(a.cols(), d);
    EXPECT_TRUE(a == transform(params, x));
    const EmbeddingMatrix empty(0, d);
    const auto out = transform(params, empty);
    EXPECT_EQ(out.n(), 0);
    EXPECT_EQ(out.d(), d);
  }
}

TEST(Transform, DimensionMismatchThrows) {
  const auto params = init_params(PearlConfig{}.resolved(4), 4, 2);
  EXPECT_THROW(transform(params, Matrix::Zero(2, 5)), Error);
}

TEST(Checkpoint, RoundTripsAndRejectsTruncation) {
  const auto s = synthetic_split(100, 5);
  PearlConfig cfg;
  cfg.max_epochs = 3;
  const auto r = train(cfg, s.train_x, s.train_y, s.val_x, s.val_y, s.prototypes);
  PearlCheckpoint ckpt{r.config, Standardizer::fit(s.train_x), r.params};
  const auto bytes = ckpt.serialize();
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(bytes[0], 'P');
  EXPECT_EQ(bytes[5], 5);
  const auto back = PearlCheckpoint::deserialize(bytes);
  EXPECT_TRUE(back.params == ckpt.params);
  EXPECT_EQ(back.serialize(), bytes);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(PearlCheckpoint::deserialize(cut), LoadError);
}

}  // namespace
}  // namespace pearl
