#include "pearl/pearl_model.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "pearl/container.hpp"
#include "pearl/random.hpp"

namespace pearl {
namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kMinImprovement = 1e-6;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

int ceil_div(Index a, int b) { return static_cast<int>((a + b - 1) / b); }

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  return (x * layer.weight).rowwise() + layer.bias.transpose();
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

struct RowNormalized {
  Matrix unit;
  Vector norm;
};

RowNormalized normalize_rows(const Matrix& m) {
  RowNormalized out{Matrix::Zero(m.rows(), m.cols()), m.rowwise().norm()};
  for (Index i = 0; i < m.rows(); ++i) {
    if (out.norm(i) >= kZeroNorm) out.unit.row(i) = m.row(i) / out.norm(i);
  }
  return out;
}

/// Pulls a gradient w.r.t. unit rows back to the unnormalized rows:
/// (g - (g.u) u) / |m|, zero for rows below the guard.
Matrix normalize_rows_backward(const RowNormalized& rn, const Matrix& d_unit) {
  Matrix out = Matrix::Zero(d_unit.rows(), d_unit.cols());
  for (Index i = 0; i < d_unit.rows(); ++i) {
    if (rn.norm(i) < kZeroNorm) continue;
    const double along = d_unit.row(i).dot(rn.unit.row(i));
    out.row(i) = (d_unit.row(i) - along * rn.unit.row(i)) / rn.norm(i);
  }
  return out;
}

/// Row-wise softmax; also returns log-sum-exp per row.
Matrix softmax_rows(const Matrix& logits, Vector& log_sum_exp) {
  const Vector row_max = logits.rowwise().maxCoeff();
  Matrix shifted = (logits.colwise() - row_max).array().exp().matrix();
  const Vector sums = shifted.rowwise().sum();
  log_sum_exp = row_max.array() + sums.array().log();
  return shifted.array().colwise() / sums.array();
}

Matrix one_hot(std::span<const int> labels, Index num_classes) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i), labels[i]) = 1.0;
  return y;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

/// Loss values plus the intermediates the backward pass reuses.
struct LossDetail {
  LossTerms terms;
  Matrix targets;        // one-hot labels
  Matrix contrast_prob;  // softmax over prototype cosines / tau
  Matrix cls_prob;       // softmax over classifier logits
  RowNormalized signal_bar;
  RowNormalized residual_bar;
  Matrix cross;  // signal_bar^T residual_bar / B
};

LossDetail compute_loss(const ForwardPass& fwd, const Matrix& batch, std::span<const int> labels,
                        const PrototypeSet& prototypes, const PearlConfig& cfg) {
  const Index b = batch.rows();
  if (b == 0) throw InvalidArgument("loss needs a non-empty batch");
  if (labels.size() != static_cast<std::size_t>(b)) {
    throw InvalidArgument("label count does not match batch size");
  }
  const Index num_classes = prototypes.num_classes();
  if (fwd.logits.cols() != num_classes) {
    throw InvalidArgument("classifier width does not match prototype count");
  }
  if (prototypes.dim() != fwd.proj_out.cols()) {
    throw InvalidArgument("prototype dimension does not match embedding dimension");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidArgument("training label outside [0, C)");
  }

  const double inv_b = 1.0 / static_cast<double>(b);
  LossDetail out;
  LossTerms& t = out.terms;
  out.targets = one_hot(labels, num_classes);

  t.recon = (fwd.x_tilde - batch).squaredNorm() * inv_b;
  t.full = (fwd.x_hat_full - batch).squaredNorm() * inv_b;

  const Matrix cosines = fwd.proj_out * prototypes.normalized.transpose();
  t.align = (1.0 - (cosines.array() * out.targets.array()).rowwise().sum()).sum() * inv_b;

  Vector lse;
  const Matrix scaled = cosines / cfg.tau;
  out.contrast_prob = softmax_rows(scaled, lse);
  t.contrast = (lse.array() - (scaled.array() * out.targets.array()).rowwise().sum()).sum() * inv_b;

  out.cls_prob = softmax_rows(fwd.logits, lse);
  t.cls = (lse.array() - (fwd.logits.array() * out.targets.array()).rowwise().sum()).sum() * inv_b;

  out.signal_bar = normalize_rows(fwd.z_s);
  out.residual_bar = normalize_rows(fwd.z_r);
  out.cross = out.signal_bar.unit.transpose() * out.residual_bar.unit * inv_b;
  t.ortho = out.cross.cwiseAbs().mean();

  t.total = cfg.w_recon * t.recon + cfg.w_full * t.full + cfg.w_align * t.align +
            cfg.w_contrast * t.contrast + cfg.w_cls * t.cls + cfg.w_ortho * t.ortho;
  if (!std::isfinite(t.total)) throw NumericalError("non-finite loss");
  return out;
}

/// Accumulates parameter gradients into `grad`; returns the input gradient.
Matrix dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& d_out, DenseLayer& grad) {
  grad.weight.noalias() += input.transpose() * d_out;
  grad.bias += d_out.colwise().sum().transpose();
  return d_out * layer.weight.transpose();
}

Matrix mlp_backward(const Mlp& mlp, const Matrix& input, const Matrix& pre, const Matrix& hidden,
                    const Matrix& d_out, Mlp& grad) {
  Matrix d_hidden = dense_backward(mlp.output, hidden, d_out, grad.output);
  d_hidden.array() *= (pre.array() > 0.0).cast<double>();
  return dense_backward(mlp.hidden, input, d_hidden, grad.hidden);
}

DenseLayer glorot(Rng& rng, Index fan_in, Index fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseLayer layer{Matrix(fan_in, fan_out), Vector::Zero(fan_out)};
  for (Index i = 0; i < fan_in; ++i) {
    for (Index j = 0; j < fan_out; ++j) layer.weight(i, j) = rng.uniform(-limit, limit);
  }
  return layer;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
  return out;
}

void accumulate(LossTerms& sum, const LossTerms& t, double weight) {
  sum.recon += weight * t.recon;
  sum.full += weight * t.full;
  sum.align += weight * t.align;
  sum.contrast += weight * t.contrast;
  sum.cls += weight * t.cls;
  sum.ortho += weight * t.ortho;
  sum.total += weight * t.total;
}

LossTerms evaluate_loss(const PearlParams& params, const PearlConfig& cfg, const Matrix& x,
                        std::span<const int> y, const PrototypeSet& prototypes) {
  return loss_terms(forward(params, x), x, y, prototypes, cfg);
}

class Adam {
 public:
  explicit Adam(const PearlParams& shape) : m_(shape.zeros_like()), v_(shape.zeros_like()) {}

  void step(PearlParams& params, const PearlParams& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, t_);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t_);
    auto p = params.layers();
    const auto g = grad.layers();
    auto m = m_.layers();
    auto v = v_.layers();
    for (std::size_t k = 0; k < PearlParams::kLayerCount; ++k) {
      update(p[k]->weight, g[k]->weight, m[k]->weight, v[k]->weight, lr, c1, c2);
      update(p[k]->bias, g[k]->bias, m[k]->bias, v[k]->bias, lr, c1, c2);
    }
  }

 private:
  template <typename P, typename G>
  static void update(P& param, const G& grad, P& m, P& v, double lr, double c1, double c2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
  }

  PearlParams m_;
  PearlParams v_;
  int t_ = 0;
};

}  // namespace

PearlConfig PearlConfig::resolved(Index d) const {
  PearlConfig out = *this;
  if (out.hidden == 0) out.hidden = static_cast<int>(d);
  if (out.d_s == 0) out.d_s = ceil_div(d, 2);
  if (out.d_r == 0) out.d_r = ceil_div(d, 4);
  return out;
}

void PearlConfig::validate() const {
  if (d_s < 0 || d_r < 0 || hidden < 0) throw InvalidArgument("layer widths must be non-negative");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive");
  for (double w : {w_recon, w_full, w_align, w_contrast, w_cls, w_ortho}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("loss weights must be finite and >= 0");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (max_epochs < 1) throw InvalidArgument("max_epochs must be >= 1");
  if (patience < 0) throw InvalidArgument("patience must be >= 0");
}

const std::array<const char*, PearlParams::kLayerCount> PearlParams::kLayerNames = {
    "signal_encoder.hidden", "signal_encoder.output",  "residual_encoder.hidden",
    "residual_encoder.output", "signal_decoder.hidden", "signal_decoder.output",
    "full_decoder.hidden",   "full_decoder.output",    "projection",
    "classifier"};

std::array<DenseLayer*, PearlParams::kLayerCount> PearlParams::layers() {
  return {&signal_encoder.hidden,   &signal_encoder.output, &residual_encoder.hidden,
          &residual_encoder.output, &signal_decoder.hidden, &signal_decoder.output,
          &full_decoder.hidden,     &full_decoder.output,   &projection,
          &classifier};
}

std::array<const DenseLayer*, PearlParams::kLayerCount> PearlParams::layers() const {
  return {&signal_encoder.hidden,   &signal_encoder.output, &residual_encoder.hidden,
          &residual_encoder.output, &signal_decoder.hidden, &signal_decoder.output,
          &full_decoder.hidden,     &full_decoder.output,   &projection,
          &classifier};
}

PearlParams PearlParams::zeros_like() const {
  PearlParams out = *this;
  for (auto* layer : out.layers()) {
    layer->weight.setZero();
    layer->bias.setZero();
  }
  return out;
}

bool PearlParams::all_finite() const {
  for (const auto* layer : layers()) {
    if (!layer->weight.allFinite() || !layer->bias.allFinite()) return false;
  }
  return true;
}

Index PearlParams::size() const {
  Index total = 0;
  for (const auto* layer : layers()) total += layer->weight.size() + layer->bias.size();
  return total;
}

bool operator==(const PearlParams& a, const PearlParams& b) {
  const auto la = a.layers();
  const auto lb = b.layers();
  for (std::size_t k = 0; k < PearlParams::kLayerCount; ++k) {
    if (la[k]->weight.rows() != lb[k]->weight.rows() || la[k]->weight.cols() != lb[k]->weight.cols() ||
        la[k]->weight != lb[k]->weight || la[k]->bias != lb[k]->bias) {
      return false;
    }
  }
  return true;
}

PearlParams init_params(const PearlConfig& cfg, Index d, int num_classes) {
  if (d < 1 || num_classes < 1) throw InvalidArgument("init_params needs d >= 1 and C >= 1");
  if (cfg.d_s < 1 || cfg.d_r < 1 || cfg.hidden < 1) {
    throw InvalidArgument("init_params needs a resolved config (d_s, d_r, hidden >= 1)");
  }
  Rng rng(cfg.seed);
  const Index h = cfg.hidden;
  PearlParams p;
  p.signal_encoder = {glorot(rng, d, h), glorot(rng, h, cfg.d_s)};
  p.residual_encoder = {glorot(rng, d, h), glorot(rng, h, cfg.d_r)};
  p.signal_decoder = {glorot(rng, cfg.d_s, h), glorot(rng, h, d)};
  p.full_decoder = {glorot(rng, cfg.d_s + cfg.d_r, h), glorot(rng, h, d)};
  p.projection = glorot(rng, cfg.d_s, d);
  p.classifier = glorot(rng, cfg.d_s, num_classes);
  return p;
}

ForwardPass forward(const PearlParams& params, const Matrix& batch) {
  if (batch.cols() != params.input_dim()) {
    throw InvalidArgument("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                          std::to_string(params.input_dim()));
  }
  ForwardPass f;
  f.signal_pre = affine(params.signal_encoder.hidden, batch);
  f.signal_hidden = relu(f.signal_pre);
  f.z_s = affine(params.signal_encoder.output, f.signal_hidden);

  f.residual_pre = affine(params.residual_encoder.hidden, batch);
  f.residual_hidden = relu(f.residual_pre);
  f.z_r = affine(params.residual_encoder.output, f.residual_hidden);

  f.decoder_pre = affine(params.signal_decoder.hidden, f.z_s);
  f.decoder_hidden = relu(f.decoder_pre);
  f.x_tilde = affine(params.signal_decoder.output, f.decoder_hidden);

  Matrix joint(batch.rows(), f.z_s.cols() + f.z_r.cols());
  joint << f.z_s, f.z_r;
  f.full_pre = affine(params.full_decoder.hidden, joint);
  f.full_hidden = relu(f.full_pre);
  f.x_hat_full = affine(params.full_decoder.output, f.full_hidden);

  f.proj_raw = affine(params.projection, f.z_s);
  auto normalized = normalize_rows(f.proj_raw);
  f.proj_out = std::move(normalized.unit);
  f.proj_norm = std::move(normalized.norm);

  f.logits = affine(params.classifier, f.z_s);

  require_finite(f.z_s, "signal code");
  require_finite(f.z_r, "residual code");
  require_finite(f.x_tilde, "refined embedding");
  require_finite(f.x_hat_full, "full reconstruction");
  require_finite(f.proj_raw, "projection");
  require_finite(f.logits, "logits");
  return f;
}

LossTerms loss_terms(const ForwardPass& fwd, const Matrix& batch, std::span<const int> labels,
                     const PrototypeSet& prototypes, const PearlConfig& cfg) {
  return compute_loss(fwd, batch, labels, prototypes, cfg).terms;
}

LossAndGradient compute_gradients(const PearlParams& params, const PearlConfig& cfg, const Matrix& batch,
                                  std::span<const int> labels, const PrototypeSet& prototypes) {
  const ForwardPass f = forward(params, batch);
  const LossDetail loss = compute_loss(f, batch, labels, prototypes, cfg);
  const Index b = batch.rows();
  const double inv_b = 1.0 / static_cast<double>(b);
  const Index ds = f.z_s.cols();
  const Index dr = f.z_r.cols();

  LossAndGradient out{loss.terms, params.zeros_like()};
  PearlParams& g = out.gradient;
  Matrix d_signal = Matrix::Zero(b, ds);
  Matrix d_residual = Matrix::Zero(b, dr);

  if (cfg.w_recon != 0.0) {
    const Matrix d_x_tilde = (2.0 * cfg.w_recon * inv_b) * (f.x_tilde - batch);
    d_signal += mlp_backward(params.signal_decoder, f.z_s, f.decoder_pre, f.decoder_hidden, d_x_tilde,
                             g.signal_decoder);
  }

  if (cfg.w_full != 0.0) {
    const Matrix d_x_hat = (2.0 * cfg.w_full * inv_b) * (f.x_hat_full - batch);
    Matrix joint(b, ds + dr);
    joint << f.z_s, f.z_r;
    const Matrix d_joint =
        mlp_backward(params.full_decoder, joint, f.full_pre, f.full_hidden, d_x_hat, g.full_decoder);
    d_signal += d_joint.leftCols(ds);
    d_residual += d_joint.rightCols(dr);
  }

  if (cfg.w_align != 0.0 || cfg.w_contrast != 0.0) {
    // d/d proj_out of both prototype terms; cos(p, pi_c) = p . pi_c for unit rows.
    Matrix d_proj_out = Matrix::Zero(b, f.proj_out.cols());
    if (cfg.w_align != 0.0) {
      d_proj_out -= (cfg.w_align * inv_b) * (loss.targets * prototypes.normalized);
    }
    if (cfg.w_contrast != 0.0) {
      d_proj_out += (cfg.w_contrast * inv_b / cfg.tau) *
                    ((loss.contrast_prob - loss.targets) * prototypes.normalized);
    }
    const Matrix d_proj_raw = normalize_rows_backward({f.proj_out, f.proj_norm}, d_proj_out);
    d_signal += dense_backward(params.projection, f.z_s, d_proj_raw, g.projection);
  }

  if (cfg.w_cls != 0.0) {
    const Matrix d_logits = (cfg.w_cls * inv_b) * (loss.cls_prob - loss.targets);
    d_signal += dense_backward(params.classifier, f.z_s, d_logits, g.classifier);
  }

  if (cfg.w_ortho != 0.0) {
    const Matrix sign = loss.cross.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
    const Matrix d_cross = (cfg.w_ortho / static_cast<double>(ds * dr)) * sign;
    const Matrix d_signal_bar = (loss.residual_bar.unit * d_cross.transpose()) * inv_b;
    const Matrix d_residual_bar = (loss.signal_bar.unit * d_cross) * inv_b;
    d_signal += normalize_rows_backward(loss.signal_bar, d_signal_bar);
    d_residual += normalize_rows_backward(loss.residual_bar, d_residual_bar);
  }

  mlp_backward(params.signal_encoder, batch, f.signal_pre, f.signal_hidden, d_signal, g.signal_encoder);
  mlp_backward(params.residual_encoder, batch, f.residual_pre, f.residual_hidden, d_residual,
               g.residual_encoder);
  return out;
}

TrainResult train(const PearlConfig& cfg_in, const Matrix& train_x, std::span<const int> train_y,
                  const Matrix& val_x, std::span<const int> val_y, const PrototypeSet& prototypes) {
  cfg_in.validate();
  if (train_x.rows() == 0) throw InvalidArgument("training set is empty");
  if (train_y.size() != static_cast<std::size_t>(train_x.rows()) ||
      val_y.size() != static_cast<std::size_t>(val_x.rows())) {
    throw InvalidArgument("label count does not match row count");
  }
  if (val_x.rows() > 0 && val_x.cols() != train_x.cols()) {
    throw InvalidArgument("validation and training dimensions differ");
  }

  TrainResult result;
  result.config = cfg_in.resolved(train_x.cols());
  const PearlConfig& cfg = result.config;
  PearlParams params = init_params(cfg, train_x.cols(), prototypes.num_classes());
  TrainTrace& trace = result.trace;
  const bool has_val = val_x.rows() > 0;

  try {
    trace.initial_train = evaluate_loss(params, cfg, train_x, train_y, prototypes);
  } catch (const NumericalError& e) {
    throw TrainingError(std::string("initial loss: ") + e.what(), trace);
  }

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(params);
  const auto n = static_cast<std::size_t>(train_x.rows());
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::vector<int> batch_labels;

  PearlParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  double plateau_ref = best_val;
  int since_improvement = 0;
  trace.stop_reason = "max_epochs";

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));

    EpochRecord record;
    record.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch_size, ++batch_index) {
      const auto rows = std::span(order).subspan(start, std::min(batch_size, n - start));
      const Matrix batch = gather_rows(train_x, rows);
      batch_labels.clear();
      for (auto r : rows) batch_labels.push_back(train_y[r]);
      try {
        const auto step = compute_gradients(params, cfg, batch, batch_labels, prototypes);
        accumulate(record.train, step.loss, static_cast<double>(rows.size()) / static_cast<double>(n));
        adam.step(params, step.gradient, cfg.lr);
        if (!params.all_finite()) throw NumericalError("non-finite parameter after update");
      } catch (const NumericalError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                                ": " + e.what(),
                            trace);
      }
    }

    try {
      record.val_total = has_val ? evaluate_loss(params, cfg, val_x, val_y, prototypes).total
                                 : evaluate_loss(params, cfg, train_x, train_y, prototypes).total;
    } catch (const NumericalError& e) {
      trace.epochs.push_back(record);
      throw TrainingError("epoch " + std::to_string(epoch) + " validation: " + e.what(), trace);
    }
    trace.epochs.push_back(record);

    if (record.val_total < best_val) {
      best_val = record.val_total;
      best = params;
      trace.best_epoch = epoch;
      trace.best_val_total = best_val;
    }
    if (record.val_total < plateau_ref - kMinImprovement) {
      plateau_ref = record.val_total;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (since_improvement >= cfg.patience) {
      trace.stop_reason = "patience";
      break;
    }
  }

  result.params = std::move(best);
  return result;
}

TrainResult train(const PearlConfig& cfg, const LabeledDataset& labeled_train, const LabeledDataset& val,
                  const PrototypeSet& prototypes) {
  return train(cfg, labeled_train.embeddings.to_double(), labeled_train.labels, val.embeddings.to_double(),
               val.labels, prototypes);
}

Matrix transform(const PearlParams& params, const Matrix& x) {
  if (x.cols() != params.input_dim()) {
    throw InvalidArgument("input has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(params.input_dim()));
  }
  if (x.rows() == 0) return Matrix(0, x.cols());
  const Matrix z_s = affine(params.signal_encoder.output, relu(affine(params.signal_encoder.hidden, x)));
  Matrix out = affine(params.signal_decoder.output, relu(affine(params.signal_decoder.hidden, z_s)));
  require_finite(out, "refined embedding");
  return out;
}

EmbeddingMatrix transform(const PearlParams& params, const EmbeddingMatrix& x) {
  if (x.empty()) {
    if (x.d() != params.input_dim()) throw InvalidArgument("input dimension does not match model");
    return EmbeddingMatrix(0, x.d());
  }
  return EmbeddingMatrix::from_double(transform(params, x.to_double()));
}

EmbeddingMatrix PearlCheckpoint::apply(const EmbeddingMatrix& raw) const {
  if (raw.d() != params.input_dim()) {
    throw InvalidArgument("data has dimension " + std::to_string(raw.d()) + ", model expects " +
                          std::to_string(params.input_dim()));
  }
  if (raw.empty()) return EmbeddingMatrix(0, raw.d());
  return EmbeddingMatrix::from_double(transform(params, standardizer.apply(raw.to_double())));
}

std::vector<std::uint8_t> PearlCheckpoint::serialize() const {
  container::Writer out;
  out.header(container::Kind::kModel);
  for (int v : {config.d_s, config.d_r, config.hidden, config.batch_size, config.max_epochs, config.patience}) {
    out.u32(static_cast<std::uint32_t>(v));
  }
  out.u64(config.seed);
  for (double v : {config.w_recon, config.w_full, config.w_align, config.w_contrast, config.w_cls,
                   config.w_ortho, config.tau, config.lr}) {
    out.f64(v);
  }
  out.u32(static_cast<std::uint32_t>(params.input_dim()));
  out.u32(static_cast<std::uint32_t>(params.num_classes()));
  out.u32(static_cast<std::uint32_t>(PearlParams::kLayerCount));
  for (const auto* layer : params.layers()) {
    out.u32(static_cast<std::uint32_t>(layer->fan_in()));
    out.u32(static_cast<std::uint32_t>(layer->fan_out()));
    for (Index i = 0; i < layer->weight.rows(); ++i) {
      for (Index j = 0; j < layer->weight.cols(); ++j) out.f64(layer->weight(i, j));
    }
    out.f64s({layer->bias.data(), static_cast<std::size_t>(layer->bias.size())});
  }
  const auto scaler = standardizer.serialize();
  out.tag("STDZ");
  out.u32(static_cast<std::uint32_t>(scaler.size()));
  for (auto byte : scaler) out.u8(byte);
  return out.release();
}

PearlCheckpoint PearlCheckpoint::deserialize(std::span<const std::uint8_t> bytes) {
  container::Reader in(bytes);
  in.expect_header(container::Kind::kModel);
  PearlCheckpoint ckpt;
  PearlConfig& c = ckpt.config;
  for (int* v : {&c.d_s, &c.d_r, &c.hidden, &c.batch_size, &c.max_epochs, &c.patience}) {
    *v = static_cast<int>(in.u32());
  }
  c.seed = in.u64();
  for (double* v : {&c.w_recon, &c.w_full, &c.w_align, &c.w_contrast, &c.w_cls, &c.w_ortho, &c.tau, &c.lr}) {
    *v = in.f64();
  }
  const Index d = in.u32();
  const Index num_classes = in.u32();
  const auto count_offset = in.offset();
  if (in.u32() != PearlParams::kLayerCount) {
    throw LoadError("unexpected layer count at byte offset " + std::to_string(count_offset));
  }

  // Expected shapes follow from the stored widths.
  const Index h = c.hidden;
  const std::array<std::pair<Index, Index>, PearlParams::kLayerCount> shapes = {{
      {d, h}, {h, c.d_s}, {d, h}, {h, c.d_r}, {c.d_s, h}, {h, d},
      {c.d_s + c.d_r, h}, {h, d}, {c.d_s, d}, {c.d_s, num_classes}}};
  auto layers = ckpt.params.layers();
  for (std::size_t k = 0; k < PearlParams::kLayerCount; ++k) {
    const auto shape_offset = in.offset();
    const Index fan_in = in.u32();
    const Index fan_out = in.u32();
    if (std::pair(fan_in, fan_out) != shapes[k]) {
      throw LoadError(std::string("layer ") + PearlParams::kLayerNames[k] + " has unexpected shape at byte offset " +
                      std::to_string(shape_offset));
    }
    DenseLayer& layer = *layers[k];
    layer.weight.resize(fan_in, fan_out);
    for (Index i = 0; i < fan_in; ++i) {
      for (Index j = 0; j < fan_out; ++j) layer.weight(i, j) = in.f64();
    }
    layer.bias.resize(fan_out);
    for (Index j = 0; j < fan_out; ++j) layer.bias(j) = in.f64();
  }
  if (!ckpt.params.all_finite()) throw LoadError("checkpoint contains non-finite weights");

  in.expect_tag("STDZ");
  const std::size_t scaler_size = in.u32();
  if (in.remaining() < scaler_size) {
    throw LoadError("truncated standardizer section at byte offset " + std::to_string(in.offset()));
  }
  const auto scaler_offset = in.offset();
  ckpt.standardizer = Standardizer::deserialize(bytes.subspan(scaler_offset, scaler_size));
  if (ckpt.standardizer.mean.size() != d) throw LoadError("standardizer dimension does not match model");
  for (std::size_t i = 0; i < scaler_size; ++i) in.u8();
  in.expect_end();
  return ckpt;
}

void PearlCheckpoint::save(const std::filesystem::path& path) const {
  container::write_file(path, serialize());
}

PearlCheckpoint PearlCheckpoint::load(const std::filesystem::path& path) {
  return deserialize(container::read_file(path));
}

}  // namespace pearl
