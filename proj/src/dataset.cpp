#include "proadapt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "proadapt/csv.hpp"
#include "proadapt/rng.hpp"

namespace proadapt {

void SimConfig::validate() const {
  if (years < 1) throw ValidationError("sim.years must be >= 1");
  if (samples_per_quarter < 1) throw ValidationError("sim.samples_per_quarter must be >= 1");
  if (start_year < 1 || start_year > 9999) throw ValidationError("sim.start_year must lie in [1, 9999]");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sim.sigma must be > 0");
  for (const auto& [name, v] : {std::pair<const char*, double>{"sim.mu_pos_start", mu_pos_start},
                                {"sim.mu_pos_end", mu_pos_end},
                                {"sim.mu_neg_start", mu_neg_start},
                                {"sim.mu_neg_end", mu_neg_end}}) {
    if (!std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite");
  }
  if (!(prior_start > 0.0 && prior_start < 1.0)) throw ValidationError("sim.prior_start must lie in (0, 1)");
  if (!(prior_end > 0.0 && prior_end < 1.0)) throw ValidationError("sim.prior_end must lie in (0, 1)");
}

TemporalDataset generate_simulated(const SimConfig& cfg) {
  cfg.validate();
  const int q_total = cfg.years * 4;
  const int n = cfg.samples_per_quarter;
  Rng rng(cfg.seed);

  TemporalDataset ds;
  ds.feature_dim = 1;
  ds.records.reserve(static_cast<std::size_t>(q_total) * n);
  for (int q = 0; q < q_total; ++q) {
    const double tau = q_total > 1 ? static_cast<double>(q) / (q_total - 1) : 0.0;
    const double mu_pos = std::lerp(cfg.mu_pos_start, cfg.mu_pos_end, tau);
    const double mu_neg = std::lerp(cfg.mu_neg_start, cfg.mu_neg_end, tau);
    const double p_pos = std::lerp(cfg.prior_start, cfg.prior_end, tau);
    const Date start = quarter_start(cfg.start_year + q / 4, q % 4 + 1);
    const Date end = next_quarter_start(cfg.start_year + q / 4, q % 4 + 1);
    const long long span_days = (end - start).count();
    for (int i = 0; i < n; ++i) {
      Record r;
      r.timestamp = start + std::chrono::days{static_cast<long long>(i) * span_days / n};
      const bool positive = rng.uniform01() < p_pos;
      r.label = positive ? 1 : 0;
      r.features = {(positive ? mu_pos : mu_neg) + cfg.sigma * rng.normal()};
      ds.records.push_back(std::move(r));
    }
  }
  ds.date_start = ds.records.front().timestamp;
  ds.date_end = ds.records.back().timestamp;
  return ds;
}

std::vector<double> hash_features(const std::vector<std::pair<std::string, std::string>>& named_values, int dim) {
  if (dim < 1) throw ValidationError("hash_dim must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
  for (const auto& [column, value] : named_values) {
    if (value.empty()) continue;
    std::uint64_t h = fnv1a64(column);
    h = fnv1a64("=", h);
    h = fnv1a64(value, h);
    const auto slot = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    out[slot] += (h >> 63) ? -1.0 : 1.0;
  }
  return out;
}

namespace {

std::size_t column_index(const CsvTable& table, const std::string& name, const std::filesystem::path& path) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) {
    std::string cols;
    for (const auto& h : table.header) {
      if (!cols.empty()) cols += ", ";
      cols += h;
    }
    throw ValidationError("column '" + name + "' not found in " + path.string() + " (header: " + cols + ")");
  }
  return static_cast<std::size_t>(it - table.header.begin());
}

void finalize_sorted(TemporalDataset& ds) {
  std::stable_sort(ds.records.begin(), ds.records.end(),
                   [](const Record& a, const Record& b) { return a.timestamp < b.timestamp; });
  ds.date_start = ds.records.front().timestamp;
  ds.date_end = ds.records.back().timestamp;
}

std::string record_key(const Record& r) {
  std::string key;
  key.reserve(16 + r.features.size() * sizeof(double));
  const auto days = static_cast<std::int64_t>(r.timestamp.time_since_epoch().count());
  key.append(reinterpret_cast<const char*>(&days), sizeof days);
  key.push_back(static_cast<char>(r.label));
  key.append(reinterpret_cast<const char*>(r.features.data()), r.features.size() * sizeof(double));
  return key;
}

}  // namespace

IngestResult ingest_csv(const std::filesystem::path& path, const IngestSchema& schema) {
  if (schema.hash_dim < 1) throw ValidationError("ingest.hash_dim must be >= 1");
  if (schema.date_column.empty()) throw ValidationError("ingest.date_column must be set");
  if (schema.label_column.empty()) throw ValidationError("ingest.label_column must be set");
  if (schema.feature_columns.empty()) throw ValidationError("ingest.feature_columns must not be empty");
  if (schema.max_date < schema.min_date) throw ValidationError("ingest.max_date precedes ingest.min_date");

  const CsvTable table = read_csv_file(path);
  const std::size_t date_col = column_index(table, schema.date_column, path);
  const std::size_t label_col = column_index(table, schema.label_column, path);
  std::vector<std::size_t> feature_cols;
  feature_cols.reserve(schema.feature_columns.size());
  for (const auto& name : schema.feature_columns) feature_cols.push_back(column_index(table, name, path));

  const std::unordered_set<std::string> positive(schema.positive_labels.begin(), schema.positive_labels.end());

  IngestResult res;
  res.dataset.feature_dim = schema.hash_dim;
  std::vector<std::pair<std::string, std::string>> named;
  named.reserve(feature_cols.size());
  for (const auto& row : table.rows) {
    ++res.stats.rows_read;
    if (row.size() != table.header.size()) {
      ++res.stats.dropped_malformed;
      continue;
    }
    const auto date = parse_date(row[date_col], schema.date_format);
    if (!date) {
      ++res.stats.dropped_bad_date;
      continue;
    }
    if (*date < schema.min_date || *date > schema.max_date) {
      ++res.stats.dropped_out_of_range;
      continue;
    }
    if (row[label_col].empty()) {
      ++res.stats.dropped_missing_label;
      continue;
    }
    named.clear();
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      named.emplace_back(schema.feature_columns[k], row[feature_cols[k]]);
    }
    Record r;
    r.timestamp = *date;
    r.label = positive.count(row[label_col]) ? 1 : 0;
    r.features = hash_features(named, schema.hash_dim);
    res.dataset.records.push_back(std::move(r));
  }
  if (res.dataset.records.empty()) throw ValidationError("no usable records after ingesting " + path.string());
  finalize_sorted(res.dataset);
  return res;
}

CleanResult clean(const TemporalDataset& input, Date min_date, Date max_date) {
  if (max_date < min_date) throw ValidationError("clean window end precedes its start");
  CleanResult res;
  res.dataset.feature_dim = input.feature_dim;
  std::unordered_set<std::string> seen;
  seen.reserve(input.records.size());
  for (const Record& r : input.records) {
    if (r.label != 0 && r.label != 1) {
      ++res.stats.missing_labels_removed;
      continue;
    }
    if (r.timestamp < min_date || r.timestamp > max_date) {
      ++res.stats.out_of_range_removed;
      continue;
    }
    if (!seen.insert(record_key(r)).second) {
      ++res.stats.duplicates_removed;
      continue;
    }
    res.dataset.records.push_back(r);
  }
  if (res.dataset.records.empty()) throw ValidationError("no records remain after cleaning");
  finalize_sorted(res.dataset);
  return res;
}

}  // namespace proadapt
