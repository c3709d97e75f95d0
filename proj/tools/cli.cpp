#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "pearl/container.hpp"
#include "pearl/data_model.hpp"
#include "pearl/error.hpp"
#include "pearl/harness.hpp"
#include "pearl/pearl_model.hpp"
#include "pearl/preprocessing.hpp"
#include "pearl/prototypes.hpp"

namespace pearl::cli {
namespace {

namespace fs = std::filesystem;

/// Raised for invalid flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_pearl_flags(CLI::App& cmd, PearlConfig& cfg) {
  cmd.add_option("--d_s", cfg.d_s, "Signal width (0 = ceil(d/2))")->check(CLI::NonNegativeNumber);
  cmd.add_option("--d_r", cfg.d_r, "Residual width (0 = ceil(d/4))")->check(CLI::NonNegativeNumber);
  cmd.add_option("--hidden", cfg.hidden, "Hidden width (0 = d)")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w_recon", cfg.w_recon, "Signal reconstruction weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w_full", cfg.w_full, "Full reconstruction weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w_align", cfg.w_align, "Prototype alignment weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w_contrast", cfg.w_contrast, "Prototype contrast weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w_cls", cfg.w_cls, "Classifier weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--w_ortho", cfg.w_ortho, "Signal/residual decorrelation weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--tau", cfg.tau, "Contrast temperature")->check(CLI::PositiveNumber);
  cmd.add_option("--lr", cfg.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd.add_option("--batch_size", cfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd.add_option("--max_epochs", cfg.max_epochs, "Epoch limit")->check(CLI::PositiveNumber);
  cmd.add_option("--patience", cfg.patience, "Early-stopping patience")->check(CLI::NonNegativeNumber);
}

void write_text(const fs::path& path, const std::string& text) {
  container::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_dataset(const LabeledDataset& ds, const fs::path& path) {
  if (format_from_path(path) == FileFormat::kCsv) {
    save_csv(ds, path);
  } else {
    save_binary(ds, path);
  }
}

struct SynthArgs {
  SyntheticConfig cfg;
  std::string out;
};

int run_synth(const SynthArgs& args, std::ostream& out) {
  const auto ds = generate_synthetic(args.cfg);
  save_dataset(ds, args.out);
  out << "n=" << ds.size() << " d=" << ds.dim() << " C=" << ds.num_classes << '\n';
  for (const auto& w : ds.warnings) out << "warning: " << w << '\n';
  return kOk;
}

struct FitArgs {
  std::string data;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::string out_model;
  PearlConfig pearl;
};

int run_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  const auto ds = load_embeddings(args.data);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] != kUnlabeled) rows.push_back(i);
  }
  const auto sample = sample_label_budget(ds, rows, args.budget, args.seed);
  const auto train_set = ds.subset(sample.train_indices);
  const auto val_set = ds.subset(sample.val_indices);

  PearlCheckpoint ckpt;
  ckpt.standardizer = Standardizer::fit(train_set.embeddings.to_double());
  const Matrix train_x = ckpt.standardizer.apply(train_set.embeddings.to_double());
  const Matrix val_x = ckpt.standardizer.apply(val_set.embeddings.to_double());
  const auto prototypes = compute_prototypes(train_x, train_set.labels, ds.num_classes);

  PearlConfig cfg = args.pearl;
  cfg.seed = args.seed;
  const fs::path trace_path = args.out_model + ".trace.jsonl";
  try {
    auto result = train(cfg, train_x, train_set.labels, val_x, val_set.labels, prototypes);
    ckpt.config = result.config;
    ckpt.params = std::move(result.params);
    ckpt.save(args.out_model);
    write_text(trace_path, trace_to_json_lines(result.trace));
    out << "trained on " << sample.train_indices.size() << " rows (" << sample.val_indices.size()
        << " validation), " << result.trace.epochs.size() << " epochs, best epoch " << result.trace.best_epoch
        << ", best validation loss " << result.trace.best_val_total << '\n';
    out << "model: " << args.out_model << "\ntrace: " << trace_path.string() << '\n';
    return kOk;
  } catch (const TrainingError& e) {
    write_text(trace_path, trace_to_json_lines(e.trace()));
    err << "error: training aborted: " << e.what() << "\ntrace: " << trace_path.string() << '\n';
    return kDataError;
  }
}

struct TransformArgs {
  std::string data;
  std::string model;
  std::string out;
};

int run_transform(const TransformArgs& args, std::ostream& out) {
  auto ds = load_embeddings(args.data);
  const auto ckpt = PearlCheckpoint::load(args.model);
  ds.embeddings = ckpt.apply(ds.embeddings);
  save_dataset(ds, args.out);
  out << "n=" << ds.size() << " d=" << ds.dim() << '\n';
  return kOk;
}

struct EvaluateArgs {
  std::string data;
  std::string report;
  std::string table;
  std::vector<std::string> methods;
  ExperimentConfig cfg;
};

int run_evaluate(EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  if (!args.methods.empty()) {
    args.cfg.methods.clear();
    for (const auto& name : args.methods) {
      const auto m = parse_method(name);
      if (!m) throw UsageError("unknown method '" + name + "'");
      args.cfg.methods.push_back(*m);
    }
  }
  try {
    args.cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  const auto ds = load_embeddings(args.data);
  const auto report = run_experiment(ds, args.cfg);
  write_text(args.report, to_json_lines(report));
  const auto tables = render_tables(report, args.cfg.methods);
  if (args.table == "-") {
    out << tables;
  } else if (!args.table.empty()) {
    write_text(args.table, tables);
  }
  out << report.records.size() << " records, " << report.aggregates.size() << " aggregate cells -> "
      << args.report << '\n';
  if (!report.complete()) {
    for (const auto& e : report.errors) {
      err << "error: " << method_name(e.method) << " budget=" << e.budget << " fold=" << e.fold << ": "
          << e.message << '\n';
    }
    return kDataError;
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prototype-aligned refinement of fixed embeddings", "pearl"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled embedding corpus");
  synth_cmd->add_option("--classes", synth.cfg.num_classes, "Class count")->check(CLI::Range(2, 1 << 20));
  synth_cmd->add_option("--dim", synth.cfg.dim, "Embedding dimension")->check(CLI::Range(2, 1 << 20));
  synth_cmd->add_option("--per-class", synth.cfg.per_class, "Rows per class")->check(CLI::Range(1, 1 << 24));
  synth_cmd->add_option("--separation", synth.cfg.separation, "Class-mean spread")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--sigma", synth.cfg.noise_sigma, "Within-class noise std")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--gamma", synth.cfg.confounder_gamma, "Shared confounder strength")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", synth.cfg.seed, "Random seed");
  synth_cmd->add_option("--out", synth.out, "Output file (.csv or PEAR v1 binary)")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Train a refinement model on a label budget");
  fit_cmd->add_option("--data", fit.data, "Labeled embedding file")->required();
  fit_cmd->add_option("--budget", fit.budget, "Labeled rows to use")->required()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fit.seed, "Random seed");
  fit_cmd->add_option("--out-model", fit.out_model, "Checkpoint path")->required();
  add_pearl_flags(*fit_cmd, fit.pearl);

  TransformArgs transform_args;
  auto* transform_cmd = app.add_subcommand("transform", "Refine embeddings with a trained model");
  transform_cmd->add_option("--data", transform_args.data, "Embedding file")->required();
  transform_cmd->add_option("--model", transform_args.model, "Checkpoint from `fit`")->required();
  transform_cmd->add_option("--out", transform_args.out, "Output file (.csv or PEAR v1 binary)")->required();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Run the cross-validated label-budget protocol");
  eval_cmd->add_option("--data", eval.data, "Labeled embedding file")->required();
  eval_cmd->add_option("--folds", eval.cfg.num_folds, "Stratified folds")->check(CLI::Range(2, 1000));
  eval_cmd->add_option("--budgets", eval.cfg.budgets, "Ascending label budgets")->delimiter(',');
  eval_cmd->add_option("--ks", eval.cfg.ks, "Retrieval cutoffs")->delimiter(',');
  eval_cmd->add_option("--methods", eval.methods, "raw,pearl,l2,pca_whiten_l2,lda_l2")->delimiter(',');
  eval_cmd->add_option("--seed", eval.cfg.base_seed, "Base seed (fold f uses seed + f)");
  eval_cmd->add_option("--jobs", eval.cfg.jobs, "Worker threads")->check(CLI::Range(1, 1024));
  eval_cmd->add_option("--report", eval.report, "JSON-lines report path")->required();
  eval_cmd->add_option("--table", eval.table, "Text tables path ('-' for stdout)");
  add_pearl_flags(*eval_cmd, eval.cfg.pearl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth, out);
    if (fit_cmd->parsed()) return run_fit(fit, out, err);
    if (transform_cmd->parsed()) return run_transform(transform_args, out);
    if (eval_cmd->parsed()) return run_evaluate(eval, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace pearl::cli
