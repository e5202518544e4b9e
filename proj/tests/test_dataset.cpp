#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "proadapt/common.hpp"
#include "proadapt/dataset.hpp"
#include "proadapt/rng.hpp"

using namespace proadapt;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("SimConfig validation names the offending field") {
  SimConfig cfg;
  cfg.years = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "sim.years must be >= 1", ValidationError);
  cfg = SimConfig{};
  cfg.sigma = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), "sim.sigma must be > 0", ValidationError);
  cfg = SimConfig{};
  cfg.prior_start = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SimConfig{};
  cfg.prior_end = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SimConfig{};
  cfg.samples_per_quarter = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("generate_simulated produces a sorted quarterly dataset") {
  SimConfig cfg;
  cfg.years = 1;
  cfg.samples_per_quarter = 50;
  cfg.seed = 11;
  const TemporalDataset ds = generate_simulated(cfg);
  CHECK(ds.size() == 200);
  CHECK(ds.feature_dim == 1);
  CHECK(std::is_sorted(ds.records.begin(), ds.records.end(),
                       [](const Record& a, const Record& b) { return a.timestamp < b.timestamp; }));
  CHECK(ds.records.front().timestamp >= quarter_start(2020, 1));
  CHECK(ds.records.back().timestamp < quarter_start(2021, 1));
  for (const Record& r : ds.records) {
    CHECK((r.label == 0 || r.label == 1));
    CHECK(r.features.size() == 1);
  }
}

TEST_CASE("generate_simulated is seed-deterministic") {
  SimConfig cfg;
  cfg.years = 1;
  cfg.samples_per_quarter = 40;
  cfg.seed = 5;
  const TemporalDataset a = generate_simulated(cfg);
  const TemporalDataset b = generate_simulated(cfg);
  REQUIRE(a.size() == b.size());
  bool equal = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    equal = equal && a.records[i].timestamp == b.records[i].timestamp && a.records[i].label == b.records[i].label &&
            a.records[i].features == b.records[i].features;
  }
  CHECK(equal);
  cfg.seed = 6;
  const TemporalDataset c = generate_simulated(cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.size() && !differs; ++i) {
    differs = a.records[i].label != c.records[i].label || a.records[i].features != c.records[i].features;
  }
  CHECK(differs);
}

TEST_CASE("class prior interpolates from start to end") {
  SimConfig cfg;
  cfg.years = 4;
  cfg.samples_per_quarter = 5000;
  cfg.prior_start = 0.1;
  cfg.prior_end = 0.9;
  cfg.seed = 3;
  const TemporalDataset ds = generate_simulated(cfg);
  const auto positive_rate = [&](int year, int quarter) {
    const Date lo = quarter_start(year, quarter);
    const Date hi = next_quarter_start(year, quarter);
    int n = 0, pos = 0;
    for (const Record& r : ds.records) {
      if (r.timestamp >= lo && r.timestamp < hi) {
        ++n;
        pos += r.label;
      }
    }
    REQUIRE(n == 5000);
    return static_cast<double>(pos) / n;
  };
  CHECK(std::fabs(positive_rate(2020, 1) - 0.1) < 0.03);
  CHECK(std::fabs(positive_rate(2023, 4) - 0.9) < 0.03);
}

TEST_CASE("class means interpolate and cross") {
  SimConfig cfg;
  cfg.years = 4;
  cfg.samples_per_quarter = 5000;
  cfg.seed = 4;
  const TemporalDataset ds = generate_simulated(cfg);
  const auto class_mean = [&](int year, int quarter, int label) {
    const Date lo = quarter_start(year, quarter);
    const Date hi = next_quarter_start(year, quarter);
    double sum = 0.0;
    int n = 0;
    for (const Record& r : ds.records) {
      if (r.timestamp >= lo && r.timestamp < hi && r.label == label) {
        sum += r.features[0];
        ++n;
      }
    }
    REQUIRE(n > 100);
    return sum / n;
  };
  CHECK(std::fabs(class_mean(2020, 1, 1) - (-2.0)) < 0.1);
  CHECK(std::fabs(class_mean(2023, 4, 1) - 2.0) < 0.1);
  CHECK(std::fabs(class_mean(2020, 1, 0) - 2.0) < 0.1);
  CHECK(std::fabs(class_mean(2023, 4, 0) - (-2.0)) < 0.1);
}

TEST_CASE("hash_features places named values by FNV slot and sign") {
  // fnv1a64("color=red") % 100 == 86, top bit clear; fnv1a64("size=xl") % 100 == 71, top bit clear
  const auto v = hash_features({{"color", "red"}, {"size", "xl"}}, 100);
  REQUIRE(v.size() == 100);
  CHECK(v[86] == 1.0);
  CHECK(v[71] == 1.0);
  double total = 0.0;
  for (const double x : v) total += std::fabs(x);
  CHECK(total == 2.0);
}

TEST_CASE("hash_features skips empty values and stacks collisions") {
  const auto v = hash_features({{"color", ""}}, 16);
  for (const double x : v) CHECK(x == 0.0);
  const auto w = hash_features({{"color", "red"}, {"color", "red"}}, 100);
  CHECK(w[86] == 2.0);
}

TEST_CASE("ingest_csv maps columns, drops bad rows, and counts them") {
  const auto path = temp_file("ingest_basic.csv");
  {
    std::ofstream out(path);
    out << "when,outcome,color,size\n";
    out << "2021-05-02,yes,red,xl\n";       // kept, positive
    out << "2021-02-30,yes,red,xl\n";       // bad date
    out << "2031-01-01,no,blue,s\n";        // out of window
    out << "2021-03-01,,red,m\n";           // missing label
    out << "2021-04-01,no,green\n";         // malformed arity
    out << "2021-01-15,no,blue,s\n";        // kept, negative
  }
  IngestSchema schema;
  schema.date_column = "when";
  schema.label_column = "outcome";
  schema.positive_labels = {"yes"};
  schema.feature_columns = {"color", "size"};
  schema.hash_dim = 100;
  const IngestResult res = ingest_csv(path, schema);
  CHECK(res.stats.rows_read == 6);
  CHECK(res.stats.dropped_bad_date == 1);
  CHECK(res.stats.dropped_out_of_range == 1);
  CHECK(res.stats.dropped_missing_label == 1);
  CHECK(res.stats.dropped_malformed == 1);
  REQUIRE(res.dataset.size() == 2);
  CHECK(res.dataset.feature_dim == 100);
  CHECK(res.dataset.records[0].timestamp < res.dataset.records[1].timestamp);  // sorted
  CHECK(res.dataset.records[0].label == 0);
  CHECK(res.dataset.records[1].label == 1);
  CHECK(res.dataset.records[1].features[86] == 1.0);  // color=red
  std::filesystem::remove(path);
}

TEST_CASE("ingest_csv rejects unknown columns with the header in the message") {
  const auto path = temp_file("ingest_cols.csv");
  {
    std::ofstream out(path);
    out << "when,outcome\n2021-01-01,yes\n";
  }
  IngestSchema schema;
  schema.date_column = "date";
  schema.label_column = "outcome";
  schema.positive_labels = {"yes"};
  schema.feature_columns = {"outcome"};
  CHECK_THROWS_AS(ingest_csv(path, schema), ValidationError);
  try {
    ingest_csv(path, schema);
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("date") != std::string::npos);
    CHECK(msg.find("when") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("ingest_csv with nothing usable throws") {
  const auto path = temp_file("ingest_empty.csv");
  {
    std::ofstream out(path);
    out << "when,outcome\nnot-a-date,yes\n";
  }
  IngestSchema schema;
  schema.date_column = "when";
  schema.label_column = "outcome";
  schema.positive_labels = {"yes"};
  CHECK_THROWS_AS(ingest_csv(path, schema), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("clean dedupes, filters the window, and counts") {
  TemporalDataset ds;
  ds.feature_dim = 1;
  const Date d1 = *parse_date("2021-01-10");
  const Date d2 = *parse_date("2021-02-10");
  ds.records.push_back({d1, 1, {0.5}});
  ds.records.push_back({d1, 1, {0.5}});   // exact duplicate
  ds.records.push_back({d2, 2, {0.3}});   // label outside {0,1}
  ds.records.push_back({*parse_date("2018-01-01"), 0, {0.1}});  // before window
  ds.records.push_back({d2, 0, {0.7}});
  const CleanResult res = clean(ds, *parse_date("2019-01-01"), *parse_date("2025-12-31"));
  CHECK(res.stats.duplicates_removed == 1);
  CHECK(res.stats.missing_labels_removed == 1);
  CHECK(res.stats.out_of_range_removed == 1);
  REQUIRE(res.dataset.size() == 2);
  CHECK(res.dataset.records[0].timestamp == d1);
  CHECK(res.dataset.records[1].timestamp == d2);
  CHECK(res.dataset.date_start == d1);
  CHECK(res.dataset.date_end == d2);
}

TEST_CASE("clean throws when nothing remains") {
  TemporalDataset ds;
  ds.feature_dim = 1;
  ds.records.push_back({*parse_date("2018-01-01"), 1, {0.5}});
  CHECK_THROWS_AS(clean(ds, *parse_date("2019-01-01"), *parse_date("2025-12-31")), ValidationError);
}

TEST_CASE("near-duplicates with different features survive clean") {
  TemporalDataset ds;
  ds.feature_dim = 1;
  const Date d = *parse_date("2021-01-10");
  ds.records.push_back({d, 1, {0.5}});
  ds.records.push_back({d, 1, {0.500001}});
  ds.records.push_back({d, 0, {0.5}});
  const CleanResult res = clean(ds, *parse_date("2019-01-01"), *parse_date("2025-12-31"));
  CHECK(res.dataset.size() == 3);
  CHECK(res.stats.duplicates_removed == 0);
}
