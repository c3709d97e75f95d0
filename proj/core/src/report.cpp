#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "pearl/harness.hpp"

namespace pearl {
namespace {

using Json = nlohmann::ordered_json;

void append_line(std::string& out, const Json& j) {
  out += j.dump();
  out += '\n';
}

std::string cell_text(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", mean, std);
  return buf;
}

/// Pads to `width` display columns; "±" is one column but two bytes.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t columns = 0;
  for (unsigned char c : s) columns += (c & 0xC0) != 0x80;
  return columns >= width ? s : s + std::string(width - columns, ' ');
}

Json json_loss(const LossTerms& t) {
  Json j;
  j["recon"] = t.recon;
  j["full"] = t.full;
  j["align"] = t.align;
  j["contrast"] = t.contrast;
  j["cls"] = t.cls;
  j["ortho"] = t.ortho;
  j["total"] = t.total;
  return j;
}

}  // namespace

std::string to_json_lines(const ReportTable& report) {
  std::string out;
  for (const auto& r : report.records) {
    Json j;
    j["method"] = method_name(r.method);
    j["budget"] = r.budget;
    j["fold"] = r.fold;
    j["metric"] = r.metric;
    j["k"] = r.k;
    if (!r.class_name.empty()) j["class"] = r.class_name;
    j["value"] = r.value;
    append_line(out, j);
  }
  for (const auto& a : report.aggregates) {
    Json j;
    j["aggregate"] = true;
    j["method"] = method_name(a.method);
    j["budget"] = a.budget;
    j["metric"] = a.metric;
    j["k"] = a.k;
    if (!a.class_name.empty()) j["class"] = a.class_name;
    j["mean"] = a.mean;
    j["std"] = a.std;
    j["n_folds"] = a.n_folds;
    append_line(out, j);
  }
  for (const auto& d : report.diagnostics) {
    Json j;
    j["diagnostic"] = true;
    j["method"] = method_name(d.method);
    j["budget"] = d.budget;
    j["fold"] = d.fold;
    j["key"] = d.key;
    j["value"] = d.value;
    append_line(out, j);
  }
  for (const auto& e : report.errors) {
    Json j;
    j["error"] = true;
    j["method"] = method_name(e.method);
    j["budget"] = e.budget;
    j["fold"] = e.fold;
    j["message"] = e.message;
    append_line(out, j);
  }
  return out;
}

std::string render_tables(const ReportTable& report, std::span<const Method> methods) {
  static const std::map<std::string, std::string> kTitles = {
      {"purity", "Neighbor label purity (Purity@K)"},
      {"delta_sep", "Intra-inter similarity separation (delta_sep)"},
      {"hit", "Hit@K"},
      {"mrr", "MRR@K"},
      {"f1_uniform", "kNN F1, uniform voting"},
      {"f1_distance", "kNN F1, similarity-weighted voting"},
  };
  static const std::vector<std::string> kOrder = {"purity", "delta_sep", "hit", "mrr", "f1_uniform", "f1_distance"};

  using Key = std::tuple<std::string, std::string, std::size_t, int, Method>;
  std::map<Key, const AggregateRow*> lookup;
  std::set<std::size_t> budgets;
  std::map<std::string, std::set<int>> ks_of;
  std::map<std::string, std::vector<std::string>> classes_of;
  for (const auto& a : report.aggregates) {
    lookup[{a.metric, a.class_name, a.budget, a.k, a.method}] = &a;
    budgets.insert(a.budget);
    ks_of[a.metric].insert(a.k);
    auto& classes = classes_of[a.metric];
    if (std::find(classes.begin(), classes.end(), a.class_name) == classes.end()) classes.push_back(a.class_name);
  }

  constexpr std::size_t kWidth = 18;
  std::string out;
  for (const auto& metric : kOrder) {
    if (!ks_of.contains(metric)) continue;
    for (const auto& class_name : classes_of[metric]) {
      out += kTitles.at(metric);
      if (!class_name.empty()) out += ", class " + class_name;
      out += " (mean ± std over folds)\n";
      out += pad("Train size", 12) + pad("k", 5);
      for (auto m : methods) out += pad(std::string(method_name(m)), kWidth);
      out += '\n';
      for (auto budget : budgets) {
        bool first = true;
        for (int k : ks_of[metric]) {
          out += pad(first ? std::to_string(budget) : "", 12) + pad(k == 0 ? "-" : std::to_string(k), 5);
          first = false;
          for (auto m : methods) {
            const auto it = lookup.find({metric, class_name, budget, k, m});
            out += pad(it == lookup.end() ? "n/a" : cell_text(it->second->mean, it->second->std), kWidth);
          }
          out += '\n';
        }
      }
      out += '\n';
    }
  }
  if (!report.errors.empty()) {
    out += "Failed cells:\n";
    for (const auto& e : report.errors) {
      out += "  " + std::string(method_name(e.method)) + " budget=" + std::to_string(e.budget) +
             " fold=" + std::to_string(e.fold) + ": " + e.message + '\n';
    }
  }
  return out;
}

std::string trace_to_json_lines(const TrainTrace& trace) {
  std::string out;
  {
    Json j;
    j["initial"] = true;
    j["train"] = json_loss(trace.initial_train);
    append_line(out, j);
  }
  for (const auto& e : trace.epochs) {
    Json j;
    j["epoch"] = e.epoch;
    j["train"] = json_loss(e.train);
    j["val_total"] = e.val_total;
    append_line(out, j);
  }
  Json summary;
  summary["summary"] = true;
  summary["epochs_run"] = trace.epochs.size();
  summary["best_epoch"] = trace.best_epoch;
  summary["best_val_total"] = trace.best_val_total;
  summary["stop_reason"] = trace.stop_reason;
  append_line(out, summary);
  return out;
}

}  // namespace pearl
