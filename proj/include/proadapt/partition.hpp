#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "proadapt/dataset.hpp"

namespace proadapt {

struct TemporalBatch {
  int index = 0;  // 0-based, consecutive over the covered quarter range
  int year = 0;
  int quarter = 0;  // 1..4
  std::string label;  // "2020-Q1"
  std::vector<std::uint32_t> record_ids;  // indices into TemporalDataset::records

  bool empty() const { return record_ids.empty(); }
};

// One batch per calendar quarter between the first and last record, inclusive.
// Quarters with no records stay in the sequence as empty batches.
std::vector<TemporalBatch> batch_by_quarter(const TemporalDataset& ds);

struct Replica {
  int id = 0;
  std::vector<std::uint32_t> record_ids;  // drawn with replacement, class counts preserved
};

struct SplitBatch {
  int batch_index = 0;
  std::vector<std::uint32_t> test;
  std::vector<std::uint32_t> validation;
  std::vector<std::uint32_t> pure_train;
  std::vector<Replica> replicas;
};

// Allocates `total` slots across strata proportionally to their sizes;
// fractional remainders are settled largest-first, ties to the lower index.
std::vector<std::size_t> proportional_allocation(const std::vector<std::size_t>& stratum_sizes, std::size_t total);

// Stratified 20% test split, then a stratified 30% validation split of the
// remainder; replica_id r is reproducible independently of the replica count.
SplitBatch split_batch(const TemporalDataset& ds, const TemporalBatch& batch, std::uint64_t seed, int n_replicas);

std::vector<Replica> bootstrap_replicas(const TemporalDataset& ds, const std::vector<std::uint32_t>& pure_train,
                                        int n_replicas, std::uint64_t seed);

void write_split_manifest(const std::filesystem::path& path, const std::vector<SplitBatch>& splits);

}  // namespace proadapt
