#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pearl/data_model.hpp"
#include "pearl/pearl_model.hpp"
#include "pearl/types.hpp"

namespace pearl {

enum class Method { kRaw, kPearl, kL2, kPcaWhitenL2, kLdaL2 };

/// Report spelling: raw, pearl, l2, pca_whiten_l2, lda_l2.
std::string_view method_name(Method method);
/// Inverse of method_name; nullopt for unknown names.
std::optional<Method> parse_method(std::string_view name);

struct ExperimentConfig {
  int num_folds = 5;
  std::vector<std::size_t> budgets{100, 300, 600, 1200, 2500, 5000};
  std::vector<int> ks{1, 5, 10, 20};
  std::vector<Method> methods{Method::kRaw, Method::kPearl, Method::kL2, Method::kPcaWhitenL2, Method::kLdaL2};
  std::uint64_t base_seed = 0;
  /// Training settings for the pearl method; its seed is replaced by the
  /// fold seed.
  PearlConfig pearl;
  /// Worker threads; results do not depend on this.
  int jobs = 1;

  void validate() const;
};

struct MetricRecord {
  Method method = Method::kRaw;
  std::size_t budget = 0;
  int fold = 0;
  std::string metric;  // purity, hit, mrr, delta_sep, f1_uniform, f1_distance
  int k = 0;
  double value = 0.0;
  /// Class for f1_* records (label spelling), empty otherwise.
  std::string class_name;
};

/// Per-cell side information (whitened width, LDA shrinkage, PEARL epochs).
struct Diagnostic {
  Method method = Method::kRaw;
  std::size_t budget = 0;
  int fold = 0;
  std::string key;
  double value = 0.0;
};

struct CellError {
  Method method = Method::kRaw;
  std::size_t budget = 0;
  int fold = 0;
  std::string message;
};

/// Mean and population standard deviation across folds of one
/// (method, budget, metric, k, class) cell.
struct AggregateRow {
  Method method = Method::kRaw;
  std::size_t budget = 0;
  std::string metric;
  int k = 0;
  std::string class_name;
  double mean = 0.0;
  double std = 0.0;
  int n_folds = 0;
};

struct ReportTable {
  std::vector<MetricRecord> records;
  std::vector<AggregateRow> aggregates;
  std::vector<Diagnostic> diagnostics;
  std::vector<CellError> errors;

  bool complete() const { return errors.empty(); }
};

struct MethodRun {
  std::vector<MetricRecord> records;
  std::vector<Diagnostic> diagnostics;
};

/// Fits `method` on the labeled subset in `sample`, maps pool (the labeled
/// training rows) and queries (`test_rows`) through it, and scores the
/// queries. Every pipeline starts with a standardizer fit on the labeled
/// training rows. Emits |K|*3 retrieval records, one delta_sep record and
/// |K|*2*C F1 records.
MethodRun run_method_on_fold(Method method, const LabeledDataset& ds, std::span<const std::size_t> test_rows,
                             const BudgetSample& sample, const ExperimentConfig& cfg, int fold);

/// Stratified folds x budgets x methods. Fold f uses seed base_seed + f for
/// its budget sample and PEARL training. Unlabeled rows are dropped first.
/// A failing cell is listed in `errors` and left out of the aggregates.
ReportTable run_experiment(const LabeledDataset& ds, const ExperimentConfig& cfg);

/// Groups records by (method, budget, metric, k, class) in first-seen order.
std::vector<AggregateRow> aggregate(std::span<const MetricRecord> records);

/// JSON lines: records, then aggregates, diagnostics and errors.
std::string to_json_lines(const ReportTable& report);

/// Plain-text tables, one per metric (and class for F1), rows budget x k,
/// one column per method, cells "mean ± std".
std::string render_tables(const ReportTable& report, std::span<const Method> methods);

/// JSON lines for a training trace: one line per epoch plus a summary line.
std::string trace_to_json_lines(const TrainTrace& trace);

}  // namespace pearl
