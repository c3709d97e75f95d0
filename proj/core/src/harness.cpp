#include "pearl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>
#include <tuple>

#include "pearl/error.hpp"
#include "pearl/metrics.hpp"
#include "pearl/preprocessing.hpp"
#include "pearl/prototypes.hpp"

namespace pearl {
namespace {

constexpr std::array<std::pair<Method, std::string_view>, 5> kMethodNames{{
    {Method::kRaw, "raw"},
    {Method::kPearl, "pearl"},
    {Method::kL2, "l2"},
    {Method::kPcaWhitenL2, "pca_whiten_l2"},
    {Method::kLdaL2, "lda_l2"},
}};

Matrix rows_of(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
  return out;
}

std::vector<int> labels_of(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(ds.labels.at(r));
  return out;
}

struct Embedded {
  Matrix pool;
  Matrix queries;
};

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& [m, spelled] : kMethodNames) {
    if (spelled == name) return m;
  }
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (num_folds < 2) throw InvalidArgument("need at least 2 folds");
  if (budgets.empty()) throw InvalidArgument("budget list is empty");
  if (!std::is_sorted(budgets.begin(), budgets.end()) ||
      std::adjacent_find(budgets.begin(), budgets.end()) != budgets.end()) {
    throw InvalidArgument("budgets must be strictly ascending");
  }
  if (budgets.front() == 0) throw InvalidArgument("budgets must be positive");
  if (ks.empty()) throw InvalidArgument("k list is empty");
  for (int k : ks) {
    if (k < 1) throw InvalidArgument("every k must be >= 1");
  }
  if (methods.empty()) throw InvalidArgument("method list is empty");
  if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
  pearl.validate();
}

MethodRun run_method_on_fold(Method method, const LabeledDataset& ds, std::span<const std::size_t> test_rows,
                             const BudgetSample& sample, const ExperimentConfig& cfg, int fold) {
  MethodRun run;
  const auto note = [&](std::string key, double value) {
    run.diagnostics.push_back({method, sample.budget, fold, std::move(key), value});
  };

  const Matrix x = ds.embeddings.to_double();
  const std::vector<int> pool_labels = labels_of(ds, sample.train_indices);
  const std::vector<int> query_labels = labels_of(ds, test_rows);

  const Standardizer scaler = Standardizer::fit(rows_of(x, sample.train_indices));
  Embedded e{scaler.apply(rows_of(x, sample.train_indices)), scaler.apply(rows_of(x, test_rows))};

  switch (method) {
    case Method::kRaw:
      break;
    case Method::kL2:
      e = {l2_normalize(e.pool), l2_normalize(e.queries)};
      break;
    case Method::kPcaWhitenL2: {
      const auto whitener = PcaWhitener::fit(e.pool);
      note("whitened_dim", static_cast<double>(whitener.output_dim()));
      e = {l2_normalize(whitener.apply(e.pool)), l2_normalize(whitener.apply(e.queries))};
      break;
    }
    case Method::kLdaL2: {
      const auto lda = LdaProjector::fit(e.pool, pool_labels, ds.num_classes);
      note("lda_shrinkage", lda.shrinkage_lambda);
      e = {l2_normalize(lda.apply(e.pool)), l2_normalize(lda.apply(e.queries))};
      break;
    }
    case Method::kPearl: {
      const auto prototypes = compute_prototypes(e.pool, pool_labels, ds.num_classes);
      PearlConfig pearl_cfg = cfg.pearl;
      pearl_cfg.seed = cfg.base_seed + static_cast<std::uint64_t>(fold);
      const Matrix val = scaler.apply(rows_of(x, sample.val_indices));
      const auto trained = train(pearl_cfg, e.pool, pool_labels, val, labels_of(ds, sample.val_indices), prototypes);
      note("pearl_epochs", static_cast<double>(trained.trace.epochs.size()));
      note("pearl_best_epoch", static_cast<double>(trained.trace.best_epoch));
      note("pearl_best_val_loss", trained.trace.best_val_total);
      e = {l2_normalize(transform(trained.params, e.pool)), l2_normalize(transform(trained.params, e.queries))};
      break;
    }
  }

  const Index max_k = *std::max_element(cfg.ks.begin(), cfg.ks.end());
  const auto neighbors = top_k_neighbors(e.queries, e.pool, max_k);
  const auto emit = [&](const MetricValue& v, std::string metric, std::string class_name = {}) {
    run.records.push_back({method, sample.budget, fold, std::move(metric), v.k, v.value, std::move(class_name)});
  };

  for (int k : cfg.ks) {
    emit(purity_at_k(neighbors, query_labels, pool_labels, k), "purity");
    emit(hit_at_k(neighbors, query_labels, pool_labels, k), "hit");
    emit(mrr_at_k(neighbors, query_labels, pool_labels, k), "mrr");
  }
  emit(separation_delta(e.queries, query_labels), "delta_sep");
  for (int k : cfg.ks) {
    for (auto [weighting, name] : {std::pair{Weighting::kUniform, "f1_uniform"}, std::pair{Weighting::kDistance, "f1_distance"}}) {
      const auto predicted = knn_predict(neighbors, pool_labels, k, weighting);
      for (int c = 0; c < ds.num_classes; ++c) {
        auto v = f1_per_class(predicted, query_labels, c);
        v.k = k;
        emit(v, name, ds.label_names.at(static_cast<std::size_t>(c)));
      }
    }
  }
  return run;
}

std::vector<AggregateRow> aggregate(std::span<const MetricRecord> records) {
  using Key = std::tuple<Method, std::size_t, std::string, int, std::string>;
  std::map<Key, std::size_t> slot;
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    Key key{r.method, r.budget, r.metric, r.k, r.class_name};
    auto [it, inserted] = slot.try_emplace(key, rows.size());
    if (inserted) {
      rows.push_back({r.method, r.budget, r.metric, r.k, r.class_name, 0.0, 0.0, 0});
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = values[i];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    rows[i].mean = mean;
    rows[i].std = std::sqrt(var);
    rows[i].n_folds = static_cast<int>(v.size());
  }
  return rows;
}

ReportTable run_experiment(const LabeledDataset& input, const ExperimentConfig& cfg) {
  cfg.validate();

  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < input.labels.size(); ++i) {
    if (input.labels[i] != kUnlabeled) labeled.push_back(i);
  }
  const LabeledDataset ds = labeled.size() == input.labels.size() ? input : input.subset(labeled);
  ds.validate();
  const SplitPlan plan = stratified_kfold(ds, cfg.num_folds, cfg.base_seed);

  struct Cell {
    std::size_t budget;
    int fold;
    Method method;
    MethodRun run;
    std::optional<std::string> error;
  };
  std::vector<Cell> cells;
  for (auto budget : cfg.budgets) {
    for (int fold = 0; fold < cfg.num_folds; ++fold) {
      for (auto method : cfg.methods) cells.push_back({budget, fold, method, {}, std::nullopt});
    }
  }

  const auto work = [&](Cell& cell) {
    try {
      const auto seed = cfg.base_seed + static_cast<std::uint64_t>(cell.fold);
      const auto train_rows = plan.train_rows(cell.fold);
      const auto test_rows = plan.test_rows(cell.fold);
      const auto sample = sample_label_budget(ds, train_rows, cell.budget, seed);
      cell.run = run_method_on_fold(cell.method, ds, test_rows, sample, cfg, cell.fold);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), cells.size()));
  if (workers <= 1) {
    for (auto& cell : cells) work(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) work(cells[i]);
      });
    }
  }

  ReportTable report;
  for (auto& cell : cells) {
    if (cell.error) {
      report.errors.push_back({cell.method, cell.budget, cell.fold, *cell.error});
      continue;
    }
    report.records.insert(report.records.end(), cell.run.records.begin(), cell.run.records.end());
    report.diagnostics.insert(report.diagnostics.end(), cell.run.diagnostics.begin(), cell.run.diagnostics.end());
  }
  report.aggregates = aggregate(report.records);
  return report;
}

}  // namespace pearl
