#include "pearl/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "pearl/container.hpp"
#include "pearl/error.hpp"
#include "pearl/random.hpp"

namespace pearl {
namespace {

std::optional<long long> parse_integer(std::string_view s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

bool is_unlabeled(std::string_view s) { return s.empty() || s == "-1"; }

/// Dense ids for raw label spellings; numeric order when all are integers.
void remap_labels(const std::vector<std::string>& raw, LabeledDataset& ds) {
  std::vector<std::string> distinct;
  for (const auto& s : raw) {
    if (!is_unlabeled(s)) distinct.push_back(s);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const bool numeric = std::all_of(distinct.begin(), distinct.end(),
                                   [](const std::string& s) { return parse_integer(s).has_value(); });
  if (numeric) {
    std::sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
      return *parse_integer(a) < *parse_integer(b);
    });
  }

  std::map<std::string, int, std::less<>> id_of;
  for (std::size_t i = 0; i < distinct.size(); ++i) id_of[distinct[i]] = static_cast<int>(i);

  ds.labels.clear();
  ds.labels.reserve(raw.size());
  for (const auto& s : raw) {
    ds.labels.push_back(is_unlabeled(s) ? kUnlabeled : id_of.at(s));
  }
  ds.num_classes = static_cast<int>(distinct.size());
  ds.label_names = std::move(distinct);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string format_float(float v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? FileFormat::kCsv : FileFormat::kBinary;
}

LabeledDataset parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw LoadError("malformed header: empty file");

  const auto header = split_fields(lines.front());
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw LoadError("malformed header: expected 'id,label,e0,...'");
  }
  const auto d = static_cast<Index>(header.size() - 2);
  for (Index j = 0; j < d; ++j) {
    if (header[static_cast<std::size_t>(j + 2)] != "e" + std::to_string(j)) {
      throw LoadError("malformed header: column " + std::to_string(j + 3) + " should be 'e" +
                      std::to_string(j) + "'");
    }
  }

  const auto n = static_cast<Index>(lines.size() - 1);
  FloatMatrix values(n, d);
  std::vector<std::string> raw_labels;
  LabeledDataset ds;
  raw_labels.reserve(static_cast<std::size_t>(n));
  ds.ids.reserve(static_cast<std::size_t>(n));

  for (Index i = 0; i < n; ++i) {
    const auto row_no = std::to_string(i + 1);
    const auto fields = split_fields(lines[static_cast<std::size_t>(i + 1)]);
    if (static_cast<Index>(fields.size()) != d + 2) {
      throw LoadError("ragged row " + row_no + ": " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(d + 2));
    }
    ds.ids.emplace_back(fields[0]);
    raw_labels.emplace_back(fields[1]);
    for (Index j = 0; j < d; ++j) {
      const auto field = fields[static_cast<std::size_t>(j + 2)];
      float v = 0.0f;
      const auto* end = field.data() + field.size();
      const auto [ptr, ec] = std::from_chars(field.data(), end, v);
      if (ec == std::errc::result_out_of_range) {
        throw LoadError("non-finite value at row " + row_no);
      }
      if (ec != std::errc() || ptr != end) {
        throw LoadError("invalid number '" + std::string(field) + "' at row " + row_no +
                        ", column " + std::to_string(j + 3));
      }
      if (!std::isfinite(v)) throw LoadError("non-finite value at row " + row_no);
      values(i, j) = v;
    }
  }

  ds.embeddings = EmbeddingMatrix(std::move(values));
  remap_labels(raw_labels, ds);
  return ds;
}

LabeledDataset parse_binary(std::span<const std::uint8_t> bytes) {
  container::Reader in(bytes);
  in.expect_header(container::Kind::kEmbeddings);
  const auto n = in.u32();
  const auto d = in.u32();
  if (d == 0) throw LoadError("dimension must be >= 1 at byte offset 12");

  const std::size_t payload = static_cast<std::size_t>(n) * d * sizeof(float);
  if (in.remaining() < payload) {
    throw LoadError("truncated matrix: need " + std::to_string(payload) + " bytes at byte offset " +
                    std::to_string(in.offset()));
  }
  FloatMatrix values(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    for (Index j = 0; j < static_cast<Index>(d); ++j) {
      const auto offset = in.offset();
      const float v = in.f32();
      if (!std::isfinite(v)) {
        throw LoadError("non-finite value at row " + std::to_string(i + 1) + " (byte offset " +
                        std::to_string(offset) + ")");
      }
      values(i, j) = v;
    }
  }

  in.expect_tag("PLBL");
  const auto label_offset = in.offset();
  if (const auto label_n = in.u32(); label_n != n) {
    throw LoadError("label count " + std::to_string(label_n) + " != row count " +
                    std::to_string(n) + " at byte offset " + std::to_string(label_offset));
  }
  std::vector<std::string> raw_labels;
  raw_labels.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) raw_labels.push_back(std::to_string(in.i32()));
  in.expect_end();

  LabeledDataset ds;
  ds.embeddings = EmbeddingMatrix(std::move(values));
  remap_labels(raw_labels, ds);
  return ds;
}

LabeledDataset load_embeddings(const std::filesystem::path& path, FileFormat format) {
  const auto bytes = container::read_file(path);
  if (format == FileFormat::kCsv) {
    return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return parse_binary(bytes);
}

LabeledDataset load_embeddings(const std::filesystem::path& path) {
  return load_embeddings(path, format_from_path(path));
}

std::vector<std::uint8_t> encode_binary(const LabeledDataset& ds) {
  const auto n = ds.embeddings.n();
  if (n > std::numeric_limits<std::uint32_t>::max() || ds.embeddings.d() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("matrix too large for PEAR v1");
  }
  std::vector<std::int32_t> written(ds.label_names.size());
  for (std::size_t c = 0; c < ds.label_names.size(); ++c) {
    const auto v = parse_integer(ds.label_names[c]);
    const bool fits = v && *v >= std::numeric_limits<std::int32_t>::min() &&
                      *v <= std::numeric_limits<std::int32_t>::max() && *v != kUnlabeled;
    written[c] = fits ? static_cast<std::int32_t>(*v) : static_cast<std::int32_t>(c);
  }

  container::Writer out;
  out.header(container::Kind::kEmbeddings);
  out.u32(static_cast<std::uint32_t>(n));
  out.u32(static_cast<std::uint32_t>(ds.embeddings.d()));
  for (float v : ds.embeddings.data()) out.f32(v);
  out.tag("PLBL");
  out.u32(static_cast<std::uint32_t>(n));
  for (int y : ds.labels) {
    out.i32(y == kUnlabeled ? kUnlabeled : written.at(static_cast<std::size_t>(y)));
  }
  return out.release();
}

std::string encode_csv(const LabeledDataset& ds) {
  std::string out = "id,label";
  for (Index j = 0; j < ds.embeddings.d(); ++j) out += ",e" + std::to_string(j);
  out += '\n';
  for (Index i = 0; i < ds.embeddings.n(); ++i) {
    const auto row = static_cast<std::size_t>(i);
    out += ds.ids.empty() ? std::to_string(i) : ds.ids[row];
    out += ',';
    const int y = ds.labels[row];
    if (y != kUnlabeled) out += ds.label_names.at(static_cast<std::size_t>(y));
    for (float v : ds.embeddings.row(i)) {
      out += ',';
      out += format_float(v);
    }
    out += '\n';
  }
  return out;
}

void save_binary(const LabeledDataset& ds, const std::filesystem::path& path) {
  container::write_file(path, encode_binary(ds));
}

void save_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  const auto text = encode_csv(ds);
  container::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::size_t> SplitPlan::test_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> SplitPlan::train_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) rows.push_back(i);
  }
  return rows;
}

SplitPlan stratified_kfold(const LabeledDataset& ds, int num_folds, std::uint64_t seed) {
  if (num_folds < 2) throw InvalidArgument("fold count must be >= 2");

  // groups[C] holds unlabeled rows.
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(ds.num_classes) + 1);
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const int y = ds.labels[i];
    groups[y == kUnlabeled ? groups.size() - 1 : static_cast<std::size_t>(y)].push_back(i);
  }
  for (int c = 0; c < ds.num_classes; ++c) {
    const auto count = groups[static_cast<std::size_t>(c)].size();
    if (count < static_cast<std::size_t>(num_folds)) {
      const auto& name = c < static_cast<int>(ds.label_names.size()) ? ds.label_names[static_cast<std::size_t>(c)]
                                                                     : std::to_string(c);
      throw StratificationError("class '" + name + "' has " + std::to_string(count) +
                                " members, fewer than " + std::to_string(num_folds) + " folds");
    }
  }

  Rng rng(seed);
  SplitPlan plan;
  plan.num_folds = num_folds;
  plan.fold_of.assign(ds.labels.size(), -1);
  std::size_t offset = 0;
  for (auto& group : groups) {
    rng.shuffle(std::span(group));
    for (std::size_t j = 0; j < group.size(); ++j) {
      plan.fold_of[group[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(num_folds));
    }
    offset = (offset + group.size()) % static_cast<std::size_t>(num_folds);
  }
  return plan;
}

std::vector<std::size_t> budget_quotas(std::span<const std::size_t> available, std::size_t budget) {
  const std::size_t num_classes = available.size();
  if (num_classes == 0) throw InvalidArgument("no classes to sample from");
  std::size_t total = 0;
  for (auto a : available) total += a;
  if (budget > total) {
    throw InvalidArgument("budget " + std::to_string(budget) + " exceeds " + std::to_string(total) +
                          " available labeled rows");
  }

  std::vector<std::size_t> quota(num_classes, budget / num_classes);
  for (std::size_t c = 0; c < budget % num_classes; ++c) ++quota[c];

  std::size_t shortfall = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (quota[c] > available[c]) {
      shortfall += quota[c] - available[c];
      quota[c] = available[c];
    }
  }
  // Each redistributed row goes to the class with the smallest quota that
  // still has rows (lowest id on ties), which keeps quotas within one.
  for (; shortfall > 0; --shortfall) {
    std::size_t pick = num_classes;
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (quota[c] < available[c] && (pick == num_classes || quota[c] < quota[pick])) pick = c;
    }
    ++quota[pick];
  }
  return quota;
}

BudgetSample sample_label_budget(const LabeledDataset& ds, std::span<const std::size_t> train_fold_rows,
                                 std::size_t budget, std::uint64_t seed) {
  if (budget > train_fold_rows.size()) {
    throw InvalidArgument("budget " + std::to_string(budget) + " exceeds " +
                          std::to_string(train_fold_rows.size()) + " training rows");
  }
  const auto num_classes = static_cast<std::size_t>(ds.num_classes);
  std::vector<std::size_t> sorted(train_fold_rows.begin(), train_fold_rows.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (auto r : sorted) {
    const int y = ds.labels.at(r);
    if (y != kUnlabeled) by_class[static_cast<std::size_t>(y)].push_back(r);
  }
  std::vector<std::size_t> available(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) available[c] = by_class[c].size();
  const auto quota = budget_quotas(available, budget);

  Rng rng(seed);
  for (auto& rows : by_class) rng.shuffle(std::span(rows));

  // Stratified carve-out by largest remainder; every sampled class keeps at
  // least one training row.
  const std::size_t val_total = (kValidationPercent * budget + 50) / 100;
  std::vector<std::size_t> val_count(num_classes), cap(num_classes), frac(num_classes);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    cap[c] = quota[c] > 0 ? quota[c] - 1 : 0;
    val_count[c] = std::min(kValidationPercent * quota[c] / 100, cap[c]);
    frac[c] = kValidationPercent * quota[c] % 100;
    assigned += val_count[c];
  }
  std::vector<std::size_t> order(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  while (assigned < val_total) {
    bool progressed = false;
    for (auto c : order) {
      if (assigned == val_total) break;
      if (val_count[c] < cap[c]) {
        ++val_count[c];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) {
      throw InvalidArgument("budget " + std::to_string(budget) +
                            " too small for a validation split with one training row per class");
    }
  }

  BudgetSample sample;
  sample.budget = budget;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& rows = by_class[c];
    sample.val_indices.insert(sample.val_indices.end(), rows.begin(),
                              rows.begin() + static_cast<std::ptrdiff_t>(val_count[c]));
    sample.train_indices.insert(sample.train_indices.end(),
                                rows.begin() + static_cast<std::ptrdiff_t>(val_count[c]),
                                rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(sample.train_indices.begin(), sample.train_indices.end());
  std::sort(sample.val_indices.begin(), sample.val_indices.end());
  return sample;
}

void SyntheticConfig::validate() const {
  if (num_classes < 2) throw InvalidArgument("synthetic corpus needs at least 2 classes");
  if (dim < 2) throw InvalidArgument("synthetic corpus needs dim >= 2");
  if (per_class < 1) throw InvalidArgument("synthetic corpus needs per_class >= 1");
  for (double v : {separation, noise_sigma, confounder_gamma}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("separation, noise_sigma and confounder_gamma must be finite and >= 0");
    }
  }
}

LabeledDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const Index num_classes = cfg.num_classes;
  const Index d = cfg.dim;
  Rng rng(cfg.seed);

  LabeledDataset ds;
  Matrix means(num_classes, d);
  for (Index c = 0; c < num_classes; ++c) {
    for (Index j = 0; j < d; ++j) means(c, j) = rng.normal();
  }
  const bool orthonormalize = d >= num_classes;
  if (!orthonormalize) {
    ds.warnings.push_back("dim < num_classes: class means are unit-norm but not orthogonal");
  }
  for (Index c = 0; c < num_classes; ++c) {
    if (orthonormalize) {
      for (Index p = 0; p < c; ++p) {
        means.row(c) -= means.row(c).dot(means.row(p)) * means.row(p);
      }
    }
    means.row(c).normalize();
  }
  means *= cfg.separation;

  RowVector confounder(d);
  for (Index j = 0; j < d; ++j) confounder(j) = rng.normal();
  confounder.normalize();

  const Index n = num_classes * cfg.per_class;
  FloatMatrix values(n, d);
  ds.labels.reserve(static_cast<std::size_t>(n));
  RowVector x(d);
  for (Index c = 0; c < num_classes; ++c) {
    for (Index i = 0; i < cfg.per_class; ++i) {
      for (Index j = 0; j < d; ++j) x(j) = cfg.noise_sigma * rng.normal();
      const double s = rng.normal();
      x += means.row(c) + cfg.confounder_gamma * s * confounder;
      values.row(c * cfg.per_class + i) = x.cast<float>();
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  ds.embeddings = EmbeddingMatrix(std::move(values));
  ds.num_classes = cfg.num_classes;
  for (int c = 0; c < cfg.num_classes; ++c) ds.label_names.push_back(std::to_string(c));
  return ds;
}

}  // namespace pearl
