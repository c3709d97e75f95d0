#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pearl/types.hpp"

namespace pearl {

enum class FileFormat { kCsv, kBinary };

/// Picks the format from the extension: `.csv` is CSV, anything else binary.
FileFormat format_from_path(const std::filesystem::path& path);

/// Loads a CSV (`id,label,e0,...`) or PEAR v1 embedding file. Labels are
/// remapped to dense ids (numeric order when every label is an integer,
/// lexicographic otherwise); the original spellings land in label_names.
LabeledDataset load_embeddings(const std::filesystem::path& path, FileFormat format);
LabeledDataset load_embeddings(const std::filesystem::path& path);

LabeledDataset parse_csv(std::string_view text);
LabeledDataset parse_binary(std::span<const std::uint8_t> bytes);

/// PEAR v1 embedding payload. Labels are written back in their original
/// integer spelling when every label name is an integer.
std::vector<std::uint8_t> encode_binary(const LabeledDataset& ds);
std::string encode_csv(const LabeledDataset& ds);

void save_binary(const LabeledDataset& ds, const std::filesystem::path& path);
void save_csv(const LabeledDataset& ds, const std::filesystem::path& path);

/// Fold assignment for stratified k-fold cross validation.
struct SplitPlan {
  std::vector<int> fold_of;
  int num_folds = 0;

  /// Rows whose fold is `fold`, ascending.
  std::vector<std::size_t> test_rows(int fold) const;
  /// All other rows, ascending.
  std::vector<std::size_t> train_rows(int fold) const;
};

/// Per class, rows are shuffled and dealt round-robin to folds. Each class's
/// deal starts where the previous one stopped, so overall fold sizes also
/// differ by at most one. Unlabeled rows are assigned the same way as a
/// separate pseudo-class.
SplitPlan stratified_kfold(const LabeledDataset& ds, int num_folds, std::uint64_t seed);

struct BudgetSample {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::size_t budget = 0;
};

/// Validation carve-out fraction.
inline constexpr int kValidationPercent = 15;

/// Class-balanced labeled subset of `train_fold_rows` with a stratified
/// validation carve-out of round-half-up(15% of budget).
BudgetSample sample_label_budget(const LabeledDataset& ds,
                                 std::span<const std::size_t> train_fold_rows,
                                 std::size_t budget, std::uint64_t seed);

/// Per-class quotas for `budget` labels given per-class availability: an even
/// split with the remainder to the lowest class ids, then any shortfall
/// handed one row at a time to the smallest quota that still has rows.
std::vector<std::size_t> budget_quotas(std::span<const std::size_t> available, std::size_t budget);

struct SyntheticConfig {
  int num_classes = 5;
  int dim = 32;
  int per_class = 400;
  double separation = 3.0;
  double noise_sigma = 1.0;
  double confounder_gamma = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Gaussian class clusters plus one shared nuisance direction. Class means
/// are `separation` times Gram-Schmidt orthonormalized Gaussian draws (raw
/// unit-norm draws with a warning when dim < num_classes). Rows are grouped
/// by class.
LabeledDataset generate_synthetic(const SyntheticConfig& cfg);

}  // namespace pearl
