#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "proadapt/common.hpp"

namespace proadapt {

struct Record {
  Date timestamp{};
  int label = -1;  // 0 or 1; -1 marks a missing label until clean() drops it
  std::vector<double> features;
};

struct TemporalDataset {
  std::vector<Record> records;  // nondecreasing timestamps
  int feature_dim = 0;
  Date date_start{};
  Date date_end{};

  std::size_t size() const { return records.size(); }
};

// Two-class Gaussian stream over consecutive quarters. Class-conditional means
// and the positive prior interpolate linearly from their start to end values
// across the quarter sequence, so the classes trade places when the ranges
// cross.
struct SimConfig {
  int years = 4;
  int samples_per_quarter = 2000;
  int start_year = 2020;
  double mu_pos_start = -2.0;
  double mu_pos_end = 2.0;
  double mu_neg_start = 2.0;
  double mu_neg_end = -2.0;
  double sigma = 1.0;
  double prior_start = 0.4;
  double prior_end = 0.6;
  std::uint64_t seed = 1;

  void validate() const;  // throws ValidationError naming the offending field
};

TemporalDataset generate_simulated(const SimConfig& cfg);

inline constexpr int kDefaultHashDim = 100;

struct IngestSchema {
  std::string date_column;
  std::string date_format = "%Y-%m-%d";
  std::string label_column;
  std::vector<std::string> positive_labels;  // cell values mapped to label 1
  std::vector<std::string> feature_columns;  // categorical, feature-hashed
  int hash_dim = kDefaultHashDim;
  Date min_date = quarter_start(2019, 1);
  Date max_date = Date{std::chrono::year{2025} / 12 / 31};
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t dropped_bad_date = 0;
  std::size_t dropped_out_of_range = 0;
  std::size_t dropped_missing_label = 0;
  std::size_t dropped_malformed = 0;  // wrong column count
};

struct IngestResult {
  TemporalDataset dataset;
  IngestStats stats;
};

IngestResult ingest_csv(const std::filesystem::path& path, const IngestSchema& schema);

// Signed feature hashing of "column=value" pairs: slot from the hash modulo
// dim, sign from the hash top bit. Empty values contribute nothing.
std::vector<double> hash_features(const std::vector<std::pair<std::string, std::string>>& named_values, int dim);

struct CleanStats {
  std::size_t duplicates_removed = 0;
  std::size_t missing_labels_removed = 0;
  std::size_t out_of_range_removed = 0;
};

struct CleanResult {
  TemporalDataset dataset;
  CleanStats stats;
};

// Drops records with labels outside {0,1} or timestamps outside the window,
// dedupes exact (timestamp, label, features) copies keeping the first, and
// re-sorts by timestamp.
CleanResult clean(const TemporalDataset& input, Date min_date, Date max_date);

}  // namespace proadapt
