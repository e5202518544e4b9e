#include "proadapt/partition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "proadapt/csv.hpp"
#include "proadapt/rng.hpp"

namespace proadapt {

std::vector<TemporalBatch> batch_by_quarter(const TemporalDataset& ds) {
  if (ds.records.empty()) throw ValidationError("cannot batch an empty dataset");
  if (!std::is_sorted(ds.records.begin(), ds.records.end(),
                      [](const Record& a, const Record& b) { return a.timestamp < b.timestamp; })) {
    throw ValidationError("dataset must be sorted by timestamp before batching");
  }

  const Date first = ds.records.front().timestamp;
  const Date last = ds.records.back().timestamp;
  const int base = year_of(first) * 4 + (quarter_of(first) - 1);
  const int count = year_of(last) * 4 + (quarter_of(last) - 1) - base + 1;

  std::vector<TemporalBatch> batches(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int key = base + i;
    TemporalBatch& b = batches[static_cast<std::size_t>(i)];
    b.index = i;
    b.year = key / 4;
    b.quarter = key % 4 + 1;
    b.label = period_label(quarter_start(b.year, b.quarter));
  }
  for (std::uint32_t i = 0; i < ds.records.size(); ++i) {
    const Date t = ds.records[i].timestamp;
    const int offset = year_of(t) * 4 + (quarter_of(t) - 1) - base;
    batches[static_cast<std::size_t>(offset)].record_ids.push_back(i);
  }
  return batches;
}

std::vector<std::size_t> proportional_allocation(const std::vector<std::size_t>& stratum_sizes, std::size_t total) {
  const std::size_t n = std::accumulate(stratum_sizes.begin(), stratum_sizes.end(), std::size_t{0});
  if (total > n) throw ValidationError("cannot allocate more slots than records");
  std::vector<std::size_t> alloc(stratum_sizes.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, stratum) for stable ordering
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < stratum_sizes.size(); ++c) {
    const double quota = n == 0 ? 0.0 : static_cast<double>(total) * static_cast<double>(stratum_sizes[c]) / static_cast<double>(n);
    alloc[c] = static_cast<std::size_t>(std::floor(quota));
    assigned += alloc[c];
    remainders.emplace_back(-(quota - std::floor(quota)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t k = 0; assigned < total; ++k) {
    const std::size_t c = remainders[k % remainders.size()].second;
    if (alloc[c] < stratum_sizes[c]) {
      ++alloc[c];
      ++assigned;
    }
  }
  return alloc;
}

namespace {

std::array<std::vector<std::uint32_t>, 2> by_class(const TemporalDataset& ds, const std::vector<std::uint32_t>& ids,
                                                   const std::string& context) {
  std::array<std::vector<std::uint32_t>, 2> classes;
  for (const std::uint32_t id : ids) {
    const int label = ds.records.at(id).label;
    if (label != 0 && label != 1) throw ValidationError(context + " contains an unlabeled record; clean the dataset first");
    classes[static_cast<std::size_t>(label)].push_back(id);
  }
  return classes;
}

}  // namespace

SplitBatch split_batch(const TemporalDataset& ds, const TemporalBatch& batch, std::uint64_t seed, int n_replicas) {
  if (batch.record_ids.size() < 10) {
    throw ValidationError("batch " + batch.label + " has fewer than 10 records; cannot split");
  }
  auto classes = by_class(ds, batch.record_ids, "batch " + batch.label);
  if (classes[0].empty() || classes[1].empty()) {
    throw ValidationError("batch " + batch.label + " has a single class; stratified split impossible");
  }

  Rng rng(seed);
  rng.shuffle(classes[0]);
  rng.shuffle(classes[1]);

  const std::size_t n = batch.record_ids.size();
  const auto test_total = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const auto test_counts = proportional_allocation({classes[0].size(), classes[1].size()}, test_total);
  const std::size_t rest = n - test_total;
  const auto val_total = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(rest)));
  const auto val_counts = proportional_allocation(
      {classes[0].size() - test_counts[0], classes[1].size() - test_counts[1]}, val_total);

  SplitBatch split;
  split.batch_index = batch.index;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& ids = classes[c];
    const std::size_t t_end = test_counts[c];
    const std::size_t v_end = t_end + val_counts[c];
    if (v_end >= ids.size()) {
      throw ValidationError("batch " + batch.label + " leaves an empty training stratum after splitting");
    }
    split.test.insert(split.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(t_end));
    split.validation.insert(split.validation.end(), ids.begin() + static_cast<std::ptrdiff_t>(t_end),
                            ids.begin() + static_cast<std::ptrdiff_t>(v_end));
    split.pure_train.insert(split.pure_train.end(), ids.begin() + static_cast<std::ptrdiff_t>(v_end), ids.end());
  }
  split.replicas = bootstrap_replicas(ds, split.pure_train, n_replicas, derive_seed(seed, "bootstrap"));
  return split;
}

std::vector<Replica> bootstrap_replicas(const TemporalDataset& ds, const std::vector<std::uint32_t>& pure_train,
                                        int n_replicas, std::uint64_t seed) {
  if (n_replicas < 0) throw ValidationError("replica count must be >= 0");
  const auto classes = by_class(ds, pure_train, "training pool");
  if (classes[0].empty() || classes[1].empty()) {
    throw ValidationError("bootstrap requires both classes in the training pool");
  }
  std::vector<Replica> replicas(static_cast<std::size_t>(n_replicas));
  for (int r = 0; r < n_replicas; ++r) {
    Replica& rep = replicas[static_cast<std::size_t>(r)];
    rep.id = r;
    rep.record_ids.reserve(pure_train.size());
    Rng rng(splitmix64(seed ^ static_cast<std::uint64_t>(r)));
    for (const auto& ids : classes) {
      for (std::size_t k = 0; k < ids.size(); ++k) {
        rep.record_ids.push_back(ids[static_cast<std::size_t>(rng.below(ids.size()))]);
      }
    }
  }
  return replicas;
}

void write_split_manifest(const std::filesystem::path& path, const std::vector<SplitBatch>& splits) {
  CsvWriter out(path, {"record_id", "batch_index", "role", "replica_id"});
  for (const SplitBatch& s : splits) {
    const std::string batch = std::to_string(s.batch_index);
    for (const auto id : s.test) out.write_row({std::to_string(id), batch, "test", ""});
    for (const auto id : s.validation) out.write_row({std::to_string(id), batch, "validation", ""});
    for (const auto id : s.pure_train) out.write_row({std::to_string(id), batch, "pure_train", ""});
    for (const Replica& r : s.replicas) {
      const std::string rid = std::to_string(r.id);
      for (const auto id : r.record_ids) out.write_row({std::to_string(id), batch, "replica", rid});
    }
  }
  out.close();
}

}  // namespace proadapt
