#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pearl/error.hpp"
#include "pearl/preprocessing.hpp"
#include "pearl/prototypes.hpp"
#include "pearl/types.hpp"

namespace pearl {

/// Hyperparameters of the refinement network and its optimizer. Widths set
/// to 0 are resolved against the input dimension d: hidden = d,
/// d_s = ceil(d/2), d_r = ceil(d/4).
struct PearlConfig {
  int d_s = 0;
  int d_r = 0;
  int hidden = 0;

  double w_recon = 1.0;
  double w_full = 0.5;
  double w_align = 1.0;
  double w_contrast = 1.0;
  double w_cls = 1.0;
  double w_ortho = 0.1;

  double tau = 0.1;
  double lr = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;

  /// Copy with zero widths replaced by their defaults for dimension d.
  PearlConfig resolved(Index d) const;
  void validate() const;
};

/// y = x * weight + bias, with weight stored fan_in x fan_out.
struct DenseLayer {
  Matrix weight;
  Vector bias;

  Index fan_in() const { return weight.rows(); }
  Index fan_out() const { return weight.cols(); }
};

/// One hidden ReLU layer followed by a linear output layer.
struct Mlp {
  DenseLayer hidden;
  DenseLayer output;
};

/// All trainable parameters: signal encoder (d -> d_s), residual encoder
/// (d -> d_r), signal decoder (d_s -> d), full decoder (d_s + d_r -> d),
/// prototype projection head (d_s -> d) and classifier head (d_s -> C).
struct PearlParams {
  Mlp signal_encoder;
  Mlp residual_encoder;
  Mlp signal_decoder;
  Mlp full_decoder;
  DenseLayer projection;
  DenseLayer classifier;

  static constexpr std::size_t kLayerCount = 10;
  static const std::array<const char*, kLayerCount> kLayerNames;

  /// Layers in canonical (serialization and initialization) order.
  std::array<DenseLayer*, kLayerCount> layers();
  std::array<const DenseLayer*, kLayerCount> layers() const;

  Index input_dim() const { return signal_encoder.hidden.fan_in(); }
  Index signal_dim() const { return signal_encoder.output.fan_out(); }
  Index residual_dim() const { return residual_encoder.output.fan_out(); }
  Index num_classes() const { return classifier.fan_out(); }

  /// Same shapes, all entries zero.
  PearlParams zeros_like() const;
  bool all_finite() const;
  /// Total scalar count.
  Index size() const;

  friend bool operator==(const PearlParams& a, const PearlParams& b);
};

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
/// `cfg` must already be resolved.
PearlParams init_params(const PearlConfig& cfg, Index d, int num_classes);

/// Activations of one forward pass, kept for backpropagation.
struct ForwardPass {
  Matrix signal_pre, signal_hidden, z_s;
  Matrix residual_pre, residual_hidden, z_r;
  Matrix decoder_pre, decoder_hidden, x_tilde;
  Matrix full_pre, full_hidden, x_hat_full;
  Matrix proj_raw;
  Vector proj_norm;
  Matrix proj_out;  // rows L2-normalized, zero rows stay zero
  Matrix logits;
};

/// Throws NumericalError if any activation is non-finite.
ForwardPass forward(const PearlParams& params, const Matrix& batch);

struct LossTerms {
  double recon = 0.0;
  double full = 0.0;
  double align = 0.0;
  double contrast = 0.0;
  double cls = 0.0;
  double ortho = 0.0;
  double total = 0.0;
};

/// Batch-mean loss terms and their weighted total. L_ortho is the mean
/// absolute entry of the batch-averaged cross-correlation between the
/// row-normalized signal and residual codes, so it lies in [0, 1].
LossTerms loss_terms(const ForwardPass& fwd, const Matrix& batch, std::span<const int> labels,
                     const PrototypeSet& prototypes, const PearlConfig& cfg);

struct LossAndGradient {
  LossTerms loss;
  PearlParams gradient;
};

/// Exact gradient of the weighted total loss with respect to every
/// parameter. Terms whose weight is zero contribute exactly zero.
LossAndGradient compute_gradients(const PearlParams& params, const PearlConfig& cfg, const Matrix& batch,
                                  std::span<const int> labels, const PrototypeSet& prototypes);

struct EpochRecord {
  int epoch = 0;
  LossTerms train;
  double val_total = 0.0;
};

struct TrainTrace {
  LossTerms initial_train;  // whole training set, before the first update
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_total = 0.0;
  std::string stop_reason;
};

/// Raised when a loss or parameter turns non-finite during training; carries
/// the trace recorded so far.
class TrainingError : public NumericalError {
 public:
  TrainingError(const std::string& what, TrainTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

struct TrainResult {
  PearlParams params;
  TrainTrace trace;
  PearlConfig config;  // resolved
};

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) with seeded epoch
/// shuffles. Returns the snapshot with the lowest validation loss; stops
/// after `patience` epochs without an improvement above 1e-6 or at
/// max_epochs. An empty validation set falls back to the training loss.
TrainResult train(const PearlConfig& cfg, const Matrix& train_x, std::span<const int> train_y,
                  const Matrix& val_x, std::span<const int> val_y, const PrototypeSet& prototypes);
TrainResult train(const PearlConfig& cfg, const LabeledDataset& labeled_train, const LabeledDataset& val,
                  const PrototypeSet& prototypes);

/// Refined embeddings D_s(E_s(x)); same shape as x.
Matrix transform(const PearlParams& params, const Matrix& x);
EmbeddingMatrix transform(const PearlParams& params, const EmbeddingMatrix& x);

/// Everything needed to refine raw embeddings: the input standardizer and
/// the trained network.
struct PearlCheckpoint {
  PearlConfig config;
  Standardizer standardizer;
  PearlParams params;

  /// Standardize, then refine.
  EmbeddingMatrix apply(const EmbeddingMatrix& raw) const;

  std::vector<std::uint8_t> serialize() const;
  static PearlCheckpoint deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static PearlCheckpoint load(const std::filesystem::path& path);
};

}  // namespace pearl
