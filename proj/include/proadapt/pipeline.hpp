#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "proadapt/forecast.hpp"
#include "proadapt/metrics.hpp"
#include "proadapt/shiftchar.hpp"

namespace proadapt {

inline constexpr const char* kToolVersion = "0.1.0";

struct TuneConfig {
  HyperSearchSpace space;
  int budget = 20;
  int horizon = 0;  // batches 0..horizon feed the search
  bool retune_per_horizon = false;  // single-shot run only: re-tune and re-train per training horizon
};

struct ForecastConfig {
  std::vector<SplineSpec> candidates = default_spline_candidates();
  bool use_mean_trajectory = false;  // fit the replica-mean trajectory instead of one fit per replica
};

struct CharacterizeConfig {
  int bins = 50;
  int feature = 0;  // feature column the histograms describe
  int igt_dims = 2;
};

struct PipelineConfig {
  enum class Source { simulate, ingest };

  Source source = Source::simulate;
  SimConfig sim;
  bool sim_seed_set = false;  // when false, sim.seed derives from master_seed
  std::string csv_path;
  IngestSchema schema;
  Date min_date = quarter_start(2019, 1);
  Date max_date = Date{std::chrono::year{2025} / 12 / 31};
  std::uint64_t master_seed = 1729;
  int replicas = 100;
  std::vector<int> deltas = {2, 4};
  TuneConfig tune;
  ForecastConfig forecast;
  CharacterizeConfig characterize;
  std::string out_dir = "out";
  bool export_splits = false;
  int threads = 1;

  void validate() const;
};

PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& cfg);  // canonical echo, resolved seeds included
std::uint64_t config_hash(const PipelineConfig& cfg);

struct ForecastCell {
  int delta = 0;
  int target_batch = 0;
  std::vector<ForecastResult> per_replica;  // single entry when use_mean_trajectory
};

struct RunArtifacts {
  TemporalDataset dataset;
  CleanStats clean_stats;
  IngestStats ingest_stats;
  std::vector<TemporalBatch> batches;
  std::vector<SplitBatch> splits;
  TuneResult tune;
  std::vector<std::vector<ModelParams>> snapshots;  // [replica][batch]
  std::map<std::pair<int, int>, ForecastCell> forecasts;  // key (delta, target_batch)
  EvaluationReport evaluation;
  std::vector<std::optional<double>> prevalence;
  Eigen::MatrixXd dist_marginal;
  Eigen::MatrixXd dist_conditional;
  IgtProjection igt_marginal;
  IgtProjection igt_conditional;
  std::vector<bool> cond_uniform_fill;  // per batch: a class stratum was empty
};

// The whole thing in memory: data, batching, splits, tuning, incremental
// training, forecasting, scenario evaluation, shift characterization.
RunArtifacts run_pipeline(const PipelineConfig& cfg);

// run_pipeline plus every output file and the manifest.
RunArtifacts cmd_run(const PipelineConfig& cfg);

// Staged commands persist intermediates under out_dir and verify, via the
// manifest, that inputs come from the same config and were not edited.
void cmd_simulate(const PipelineConfig& cfg);
void cmd_ingest(const PipelineConfig& cfg);
void cmd_characterize(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg);
void cmd_forecast(const PipelineConfig& cfg);
void cmd_evaluate(const PipelineConfig& cfg);
std::string cmd_report(const PipelineConfig& cfg);  // renders report.json as text

}  // namespace proadapt
