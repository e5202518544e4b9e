#include "proadapt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "proadapt/csv.hpp"
#include "proadapt/rng.hpp"

namespace proadapt {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void expect_keys(const json& j, const std::string& ctx, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError("unknown config key '" + (ctx.empty() ? key : ctx + "." + key) + "'");
    }
  }
}

template <typename T>
T get_as(const json& j, const std::string& ctx) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + ctx + "' has the wrong type");
  }
}

template <typename T>
void maybe(const json& j, const std::string& ctx, const char* key, T& out) {
  if (j.contains(key)) out = get_as<T>(j.at(key), ctx.empty() ? key : ctx + "." + std::string(key));
}

std::pair<double, double> get_range(const json& j, const std::string& ctx) {
  const auto v = get_as<std::vector<double>>(j, ctx);
  if (v.size() != 2) throw ValidationError("config key '" + ctx + "' must be a [start, end] pair");
  return {v[0], v[1]};
}

Date get_date(const json& j, const std::string& ctx) {
  const auto s = get_as<std::string>(j, ctx);
  const auto d = parse_date(s);
  if (!d) throw ValidationError("config key '" + ctx + "' is not a valid ISO date: " + s);
  return *d;
}

std::uint64_t get_u64(const json& j, const std::string& ctx) {
  if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0) {
    throw ValidationError("config key '" + ctx + "' must be a non-negative integer");
  }
  return get_as<std::uint64_t>(j, ctx);
}

void apply_config_json(const json& j, PipelineConfig& cfg) {
  expect_keys(j, "", {"source", "sim", "ingest", "window", "master_seed", "replicas", "deltas", "tune",
                      "forecast", "characterize", "out_dir", "export_splits", "threads"});
  if (j.contains("source")) {
    const auto s = get_as<std::string>(j.at("source"), "source");
    if (s == "simulate") {
      cfg.source = PipelineConfig::Source::simulate;
    } else if (s == "ingest") {
      cfg.source = PipelineConfig::Source::ingest;
    } else {
      throw ValidationError("config key 'source' must be \"simulate\" or \"ingest\"");
    }
  }
  if (j.contains("sim")) {
    const json& s = j.at("sim");
    expect_keys(s, "sim", {"years", "samples_per_quarter", "start_year", "mu_pos", "mu_neg", "prior", "sigma", "seed"});
    maybe(s, "sim", "years", cfg.sim.years);
    maybe(s, "sim", "samples_per_quarter", cfg.sim.samples_per_quarter);
    maybe(s, "sim", "start_year", cfg.sim.start_year);
    if (s.contains("mu_pos")) std::tie(cfg.sim.mu_pos_start, cfg.sim.mu_pos_end) = get_range(s.at("mu_pos"), "sim.mu_pos");
    if (s.contains("mu_neg")) std::tie(cfg.sim.mu_neg_start, cfg.sim.mu_neg_end) = get_range(s.at("mu_neg"), "sim.mu_neg");
    if (s.contains("prior")) std::tie(cfg.sim.prior_start, cfg.sim.prior_end) = get_range(s.at("prior"), "sim.prior");
    maybe(s, "sim", "sigma", cfg.sim.sigma);
    if (s.contains("seed")) {
      cfg.sim.seed = get_u64(s.at("seed"), "sim.seed");
      cfg.sim_seed_set = true;
    }
  }
  if (j.contains("ingest")) {
    const json& s = j.at("ingest");
    expect_keys(s, "ingest", {"path", "date_column", "date_format", "label_column", "positive_labels",
                              "feature_columns", "hash_dim"});
    maybe(s, "ingest", "path", cfg.csv_path);
    maybe(s, "ingest", "date_column", cfg.schema.date_column);
    maybe(s, "ingest", "date_format", cfg.schema.date_format);
    maybe(s, "ingest", "label_column", cfg.schema.label_column);
    maybe(s, "ingest", "positive_labels", cfg.schema.positive_labels);
    maybe(s, "ingest", "feature_columns", cfg.schema.feature_columns);
    maybe(s, "ingest", "hash_dim", cfg.schema.hash_dim);
  }
  if (j.contains("window")) {
    const json& s = j.at("window");
    expect_keys(s, "window", {"min_date", "max_date"});
    if (s.contains("min_date")) cfg.min_date = get_date(s.at("min_date"), "window.min_date");
    if (s.contains("max_date")) cfg.max_date = get_date(s.at("max_date"), "window.max_date");
  }
  if (j.contains("master_seed")) cfg.master_seed = get_u64(j.at("master_seed"), "master_seed");
  maybe(j, "", "replicas", cfg.replicas);
  maybe(j, "", "deltas", cfg.deltas);
  if (j.contains("tune")) {
    const json& s = j.at("tune");
    expect_keys(s, "tune", {"budget", "horizon", "retune_per_horizon", "learning_rate", "l2", "epochs", "minibatch"});
    maybe(s, "tune", "budget", cfg.tune.budget);
    maybe(s, "tune", "horizon", cfg.tune.horizon);
    maybe(s, "tune", "retune_per_horizon", cfg.tune.retune_per_horizon);
    if (s.contains("learning_rate")) {
      std::tie(cfg.tune.space.lr_min, cfg.tune.space.lr_max) = get_range(s.at("learning_rate"), "tune.learning_rate");
    }
    if (s.contains("l2")) std::tie(cfg.tune.space.l2_min, cfg.tune.space.l2_max) = get_range(s.at("l2"), "tune.l2");
    if (s.contains("epochs")) {
      const auto v = get_as<std::vector<int>>(s.at("epochs"), "tune.epochs");
      if (v.size() != 2) throw ValidationError("config key 'tune.epochs' must be a [min, max] pair");
      cfg.tune.space.epochs_min = v[0];
      cfg.tune.space.epochs_max = v[1];
    }
    if (s.contains("minibatch")) {
      const auto v = get_as<std::vector<int>>(s.at("minibatch"), "tune.minibatch");
      if (v.size() != 2) throw ValidationError("config key 'tune.minibatch' must be a [min, max] pair");
      cfg.tune.space.minibatch_min = v[0];
      cfg.tune.space.minibatch_max = v[1];
    }
  }
  if (j.contains("forecast")) {
    const json& s = j.at("forecast");
    expect_keys(s, "forecast", {"candidates", "use_mean_trajectory"});
    if (s.contains("candidates")) {
      const auto v = get_as<std::vector<std::vector<int>>>(s.at("candidates"), "forecast.candidates");
      cfg.forecast.candidates.clear();
      for (const auto& c : v) {
        if (c.size() != 2) throw ValidationError("each forecast.candidates entry must be [degree, interior_knots]");
        cfg.forecast.candidates.push_back({c[0], c[1]});
      }
    }
    maybe(s, "forecast", "use_mean_trajectory", cfg.forecast.use_mean_trajectory);
  }
  if (j.contains("characterize")) {
    const json& s = j.at("characterize");
    expect_keys(s, "characterize", {"bins", "feature", "igt_dims"});
    maybe(s, "characterize", "bins", cfg.characterize.bins);
    maybe(s, "characterize", "feature", cfg.characterize.feature);
    maybe(s, "characterize", "igt_dims", cfg.characterize.igt_dims);
  }
  maybe(j, "", "out_dir", cfg.out_dir);
  maybe(j, "", "export_splits", cfg.export_splits);
  maybe(j, "", "threads", cfg.threads);
}

std::uint64_t resolved_sim_seed(const PipelineConfig& cfg) {
  return cfg.sim_seed_set ? cfg.sim.seed : derive_seed(cfg.master_seed, "data");
}

// ---------------------------------------------------------------------------
// parallel helper: deterministic because every item writes only its own slot

template <typename F>
void parallel_for(int n, int threads, F&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// file helpers

std::uint64_t file_checksum(const std::filesystem::path& path) { return fnv1a64(read_file(path)); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (out.fail()) throw IoError("failed writing " + path.string());
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (source == Source::simulate) sim.validate();
  if (source == Source::ingest && csv_path.empty()) throw ValidationError("ingest.path must be set for source=ingest");
  if (max_date < min_date) throw ValidationError("window.max_date precedes window.min_date");
  if (replicas < 2) throw ValidationError("replicas must be >= 2");
  if (deltas.empty()) throw ValidationError("deltas must not be empty");
  for (const int d : deltas) {
    if (d < 0) throw ValidationError("deltas entries must be >= 0");
  }
  if (std::set<int>(deltas.begin(), deltas.end()).size() != deltas.size()) {
    throw ValidationError("deltas entries must be distinct");
  }
  tune.space.validate();
  if (tune.budget < 1) throw ValidationError("tune.budget must be >= 1");
  if (tune.horizon < 0) throw ValidationError("tune.horizon must be >= 0");
  if (forecast.candidates.empty()) throw ValidationError("forecast.candidates must not be empty");
  for (const SplineSpec& c : forecast.candidates) {
    if (c.degree < 1 || c.degree > 5) throw ValidationError("forecast candidate degree must lie in [1, 5]");
    if (c.interior_knots < 0 || c.interior_knots > 8) {
      throw ValidationError("forecast candidate interior_knots must lie in [0, 8]");
    }
  }
  if (characterize.bins < 2) throw ValidationError("characterize.bins must be >= 2");
  if (characterize.feature < 0) throw ValidationError("characterize.feature must be >= 0");
  if (characterize.igt_dims < 1 || characterize.igt_dims > 3) {
    throw ValidationError("characterize.igt_dims must lie in [1, 3]");
  }
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
  if (threads < 1) throw ValidationError("threads must be >= 1");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig cfg;
  apply_config_json(read_json_file(path), cfg);
  return cfg;
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  json j;
  j["source"] = cfg.source == PipelineConfig::Source::simulate ? "simulate" : "ingest";
  j["sim"] = {{"years", cfg.sim.years},
              {"samples_per_quarter", cfg.sim.samples_per_quarter},
              {"start_year", cfg.sim.start_year},
              {"mu_pos", {cfg.sim.mu_pos_start, cfg.sim.mu_pos_end}},
              {"mu_neg", {cfg.sim.mu_neg_start, cfg.sim.mu_neg_end}},
              {"prior", {cfg.sim.prior_start, cfg.sim.prior_end}},
              {"sigma", cfg.sim.sigma},
              {"seed", resolved_sim_seed(cfg)}};
  j["ingest"] = {{"path", cfg.csv_path},
                 {"date_column", cfg.schema.date_column},
                 {"date_format", cfg.schema.date_format},
                 {"label_column", cfg.schema.label_column},
                 {"positive_labels", cfg.schema.positive_labels},
                 {"feature_columns", cfg.schema.feature_columns},
                 {"hash_dim", cfg.schema.hash_dim}};
  j["window"] = {{"min_date", format_date(cfg.min_date)}, {"max_date", format_date(cfg.max_date)}};
  j["master_seed"] = cfg.master_seed;
  j["replicas"] = cfg.replicas;
  j["deltas"] = cfg.deltas;
  j["tune"] = {{"budget", cfg.tune.budget},
               {"horizon", cfg.tune.horizon},
               {"retune_per_horizon", cfg.tune.retune_per_horizon},
               {"learning_rate", {cfg.tune.space.lr_min, cfg.tune.space.lr_max}},
               {"l2", {cfg.tune.space.l2_min, cfg.tune.space.l2_max}},
               {"epochs", {cfg.tune.space.epochs_min, cfg.tune.space.epochs_max}},
               {"minibatch", {cfg.tune.space.minibatch_min, cfg.tune.space.minibatch_max}}};
  json cands = json::array();
  for (const SplineSpec& c : cfg.forecast.candidates) cands.push_back({c.degree, c.interior_knots});
  j["forecast"] = {{"candidates", cands}, {"use_mean_trajectory", cfg.forecast.use_mean_trajectory}};
  j["characterize"] = {{"bins", cfg.characterize.bins},
                       {"feature", cfg.characterize.feature},
                       {"igt_dims", cfg.characterize.igt_dims}};
  j["export_splits"] = cfg.export_splits;
  return j;
}

std::uint64_t config_hash(const PipelineConfig& cfg) { return fnv1a64(config_to_json(cfg).dump()); }

namespace {

// ---------------------------------------------------------------------------
// stages

struct DataStage {
  TemporalDataset dataset;
  CleanStats clean_stats;
  IngestStats ingest_stats;
};

DataStage stage_data(const PipelineConfig& cfg) {
  DataStage out;
  TemporalDataset raw;
  if (cfg.source == PipelineConfig::Source::simulate) {
    SimConfig sim = cfg.sim;
    sim.seed = resolved_sim_seed(cfg);
    raw = generate_simulated(sim);
  } else {
    IngestSchema schema = cfg.schema;
    schema.min_date = cfg.min_date;
    schema.max_date = cfg.max_date;
    IngestResult res = ingest_csv(cfg.csv_path, schema);
    raw = std::move(res.dataset);
    out.ingest_stats = res.stats;
  }
  CleanResult cleaned = clean(raw, cfg.min_date, cfg.max_date);
  out.dataset = std::move(cleaned.dataset);
  out.clean_stats = cleaned.stats;
  return out;
}

std::vector<SplitBatch> stage_splits(const PipelineConfig& cfg, const TemporalDataset& ds,
                                     const std::vector<TemporalBatch>& batches) {
  std::vector<SplitBatch> splits(batches.size());
  parallel_for(static_cast<int>(batches.size()), cfg.threads, [&](int q) {
    splits[static_cast<std::size_t>(q)] = split_batch(
        ds, batches[static_cast<std::size_t>(q)], derive_seed(cfg.master_seed, "split", static_cast<std::uint64_t>(q)),
        cfg.replicas);
  });
  return splits;
}

struct TrainedSeq {
  TuneResult tune;
  std::vector<std::vector<ModelParams>> snaps;  // [replica][0..horizon]
};

TrainedSeq tune_and_train(const PipelineConfig& cfg, const TemporalDataset& ds, std::span<const SplitBatch> splits,
                          std::uint64_t tune_index) {
  TrainedSeq seq;
  const int tune_through = std::min<int>(cfg.tune.horizon, static_cast<int>(splits.size()) - 1);
  seq.tune = tune_hyperparameters(ds, splits.first(static_cast<std::size_t>(tune_through) + 1), cfg.tune.space,
                                  cfg.tune.budget, derive_seed(cfg.master_seed, "tune", tune_index));
  const std::uint64_t train_seed = derive_seed(cfg.master_seed, "train", tune_index);
  seq.snaps.resize(static_cast<std::size_t>(cfg.replicas));
  parallel_for(cfg.replicas, cfg.threads, [&](int r) {
    seq.snaps[static_cast<std::size_t>(r)] = train_incremental(ds, splits, r, seq.tune.best, train_seed);
  });
  return seq;
}

std::vector<ModelParams> mean_snapshots(const std::vector<std::vector<ModelParams>>& snaps) {
  const std::size_t q = snaps.front().size();
  std::vector<ModelParams> mean(q);
  for (std::size_t b = 0; b < q; ++b) {
    ModelParams acc;
    acc.weights = Eigen::VectorXd::Zero(snaps.front()[b].weights.size());
    for (const auto& replica : snaps) {
      acc.weights += replica[b].weights;
      acc.bias += replica[b].bias;
    }
    acc.weights /= static_cast<double>(snaps.size());
    acc.bias /= static_cast<double>(snaps.size());
    mean[b] = std::move(acc);
  }
  return mean;
}

std::vector<double> index_times(int count) {
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = i;
  return t;
}

ForecastResult forecast_one(const std::vector<ModelParams>& history, int horizon,
                            const std::vector<SplineSpec>& candidates, const ModelParams& realized) {
  const std::vector<std::vector<ModelParams>> wrap = {history};
  const std::vector<ParameterTrajectory> trajs = build_trajectories(wrap, index_times(static_cast<int>(history.size())));
  ForecastResult fr = forecast_params(trajs, horizon, candidates);
  for (std::size_t p = 0; p < fr.per_param.size(); ++p) {
    const double actual =
        p + 1 < fr.per_param.size() ? realized.weights[static_cast<Eigen::Index>(p)] : realized.bias;
    const double err = std::fabs(actual - fr.per_param[p].value);
    fr.per_param[p].realized_ape = 100.0 * err / std::max(std::fabs(actual), 1e-8);
  }
  return fr;
}

}  // namespace

RunArtifacts run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  RunArtifacts art;

  DataStage data = stage_data(cfg);
  art.dataset = std::move(data.dataset);
  art.clean_stats = data.clean_stats;
  art.ingest_stats = data.ingest_stats;

  art.batches = batch_by_quarter(art.dataset);
  const int q_count = static_cast<int>(art.batches.size());
  art.splits = stage_splits(cfg, art.dataset, art.batches);

  // Training horizons: the full sequence always; with retune_per_horizon every
  // prefix gets its own tuning and warm-start pass.
  std::map<int, TrainedSeq> by_horizon;
  const std::span<const SplitBatch> all_splits{art.splits};
  if (cfg.tune.retune_per_horizon) {
    for (int h = 0; h < q_count; ++h) {
      by_horizon[h] = tune_and_train(cfg, art.dataset, all_splits.first(static_cast<std::size_t>(h) + 1),
                                     static_cast<std::uint64_t>(h));
    }
  } else {
    by_horizon[q_count - 1] = tune_and_train(cfg, art.dataset, all_splits, 0);
  }
  const TrainedSeq& full = by_horizon.at(q_count - 1);
  art.tune = full.tune;
  art.snapshots = full.snaps;

  // prefix of snapshots trained through batch h, for one replica
  const auto history_for = [&](int h, int r) -> std::vector<ModelParams> {
    if (cfg.tune.retune_per_horizon) return by_horizon.at(h).snaps[static_cast<std::size_t>(r)];
    const auto& snaps = full.snaps[static_cast<std::size_t>(r)];
    return {snaps.begin(), snaps.begin() + h + 1};
  };
  const auto params_at = [&](int h, int r) -> ModelParams {
    if (cfg.tune.retune_per_horizon) return by_horizon.at(h).snaps[static_cast<std::size_t>(r)].back();
    return full.snaps[static_cast<std::size_t>(r)][static_cast<std::size_t>(h)];
  };

  // forecasts
  std::map<int, std::vector<ModelParams>> mean_cache;
  const auto mean_history_for = [&](int h) -> const std::vector<ModelParams>& {
    auto it = mean_cache.find(h);
    if (it == mean_cache.end()) {
      std::vector<std::vector<ModelParams>> prefix(static_cast<std::size_t>(cfg.replicas));
      for (int r = 0; r < cfg.replicas; ++r) prefix[static_cast<std::size_t>(r)] = history_for(h, r);
      it = mean_cache.emplace(h, mean_snapshots(prefix)).first;
    }
    return it->second;
  };

  for (const int delta : cfg.deltas) {
    if (delta == 0) continue;
    for (int t = delta + 1; t < q_count; ++t) {
      const int h = t - delta;  // trained-through batch; h >= 1 keeps two points
      ForecastCell cell;
      cell.delta = delta;
      cell.target_batch = t;
      if (cfg.forecast.use_mean_trajectory) {
        const std::vector<ModelParams>& hist = mean_history_for(h);
        std::vector<ModelParams> realized_all(1);
        {
          std::vector<std::vector<ModelParams>> at_t(static_cast<std::size_t>(cfg.replicas));
          for (int r = 0; r < cfg.replicas; ++r) at_t[static_cast<std::size_t>(r)] = {params_at(t, r)};
          realized_all[0] = mean_snapshots(at_t).front();
        }
        cell.per_replica.resize(1);
        cell.per_replica[0] = forecast_one(hist, delta, cfg.forecast.candidates, realized_all[0]);
      } else {
        cell.per_replica.resize(static_cast<std::size_t>(cfg.replicas));
        parallel_for(cfg.replicas, cfg.threads, [&](int r) {
          cell.per_replica[static_cast<std::size_t>(r)] =
              forecast_one(history_for(h, r), delta, cfg.forecast.candidates, params_at(t, r));
        });
      }
      art.forecasts.emplace(std::make_pair(delta, t), std::move(cell));
    }
  }

  // evaluation
  ScenarioProviders providers;
  providers.baseline = [&](int delta, int t, int r) -> std::optional<ModelParams> {
    return params_at(t - delta, r);
  };
  providers.upper_bound = [&](int t, int r) -> std::optional<ModelParams> { return params_at(t, r); };
  providers.pro_adaptive = [&](int delta, int t, int r) -> std::optional<ModelParams> {
    const auto it = art.forecasts.find({delta, t});
    if (it == art.forecasts.end()) return std::nullopt;
    const auto& per = it->second.per_replica;
    return per[per.size() == 1 ? 0 : static_cast<std::size_t>(r)].params;
  };
  art.evaluation = run_scenarios(art.dataset, all_splits, cfg.replicas, providers, cfg.deltas);

  // characterization
  if (cfg.characterize.feature >= art.dataset.feature_dim) {
    throw ValidationError("characterize.feature " + std::to_string(cfg.characterize.feature) +
                          " is out of range for feature_dim " + std::to_string(art.dataset.feature_dim));
  }
  art.prevalence = prevalence_series(art.dataset, art.batches);
  {
    const auto f = static_cast<std::size_t>(cfg.characterize.feature);
    std::vector<double> pooled;
    pooled.reserve(art.dataset.size());
    for (const Record& r : art.dataset.records) pooled.push_back(r.features[f]);
    const std::vector<double> edges = histogram_edges(pooled, cfg.characterize.bins);

    std::vector<BatchPdf> marginal(art.batches.size()), conditional(art.batches.size());
    art.cond_uniform_fill.resize(art.batches.size());
    for (std::size_t b = 0; b < art.batches.size(); ++b) {
      std::vector<double> values;
      std::vector<int> labels;
      values.reserve(art.batches[b].record_ids.size());
      for (const std::uint32_t id : art.batches[b].record_ids) {
        values.push_back(art.dataset.records[id].features[f]);
        labels.push_back(art.dataset.records[id].label);
      }
      marginal[b].batch_index = art.batches[b].index;
      marginal[b].masses = histogram_masses(values, edges);
      marginal[b].uniform_fill = values.empty();
      conditional[b] = conditional_concat_pdf(values, labels, edges);
      conditional[b].batch_index = art.batches[b].index;
      art.cond_uniform_fill[b] = conditional[b].uniform_fill;
    }
    art.dist_marginal = distance_matrix(marginal);
    art.dist_conditional = distance_matrix(conditional);
    art.igt_marginal = igt_project(art.dist_marginal, cfg.characterize.igt_dims);
    art.igt_conditional = igt_project(art.dist_conditional, cfg.characterize.igt_dims);
  }
  return art;
}

// ---------------------------------------------------------------------------
// artifact writers

namespace {

const char* kManifestName = "manifest.json";

std::filesystem::path ensure_out_dir(const PipelineConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

json manifest_skeleton(const PipelineConfig& cfg) {
  json j;
  j["version"] = kToolVersion;
  j["config_hash"] = format_hex64(config_hash(cfg));
  j["seeds"] = {{"master", cfg.master_seed},
                {"data", resolved_sim_seed(cfg)},
                {"tune", derive_seed(cfg.master_seed, "tune", 0)},
                {"train", derive_seed(cfg.master_seed, "train", 0)}};
  j["files"] = json::object();
  return j;
}

void manifest_update(const PipelineConfig& cfg, const std::vector<std::string>& files, bool fresh) {
  const std::filesystem::path dir(cfg.out_dir);
  const std::filesystem::path mpath = dir / kManifestName;
  json j;
  if (!fresh && std::filesystem::exists(mpath)) {
    j = read_json_file(mpath);
    if (j.value("config_hash", "") != format_hex64(config_hash(cfg))) {
      throw ValidationError("outputs in '" + cfg.out_dir +
                            "' come from a different config or seed; use a fresh --out or match the original config");
    }
  } else {
    j = manifest_skeleton(cfg);
  }
  for (const std::string& f : files) {
    const std::filesystem::path p = dir / f;
    j["files"][f] = {{"bytes", std::filesystem::file_size(p)}, {"checksum", format_hex64(file_checksum(p))}};
  }
  write_json_file(mpath, j);
}

void manifest_require(const PipelineConfig& cfg, const std::vector<std::string>& files) {
  const std::filesystem::path dir(cfg.out_dir);
  const std::filesystem::path mpath = dir / kManifestName;
  if (!std::filesystem::exists(mpath)) {
    throw ValidationError("no manifest.json in '" + cfg.out_dir + "'; run the producing stages first");
  }
  const json j = read_json_file(mpath);
  if (j.value("config_hash", "") != format_hex64(config_hash(cfg))) {
    throw ValidationError("outputs in '" + cfg.out_dir +
                          "' come from a different config or seed; rerun the chain with one configuration");
  }
  for (const std::string& f : files) {
    if (!j.contains("files") || !j.at("files").contains(f)) {
      throw ValidationError(f + " is not recorded in the manifest; run the stage that produces it first");
    }
    const std::filesystem::path p = dir / f;
    if (!std::filesystem::exists(p)) throw IoError(p.string() + " is missing");
    if (j.at("files").at(f).value("checksum", "") != format_hex64(file_checksum(p))) {
      throw ValidationError(f + " was modified after it was produced; rerun the stage that writes it");
    }
  }
}

std::string fnum(double v) { return format_double(v); }

void write_dataset_csv(const std::filesystem::path& dir, const TemporalDataset& ds) {
  std::vector<std::string> header = {"timestamp", "label"};
  for (int j = 0; j < ds.feature_dim; ++j) header.push_back("f" + std::to_string(j));
  CsvWriter out(dir / "dataset.csv", header);
  std::vector<std::string> row(header.size());
  for (const Record& r : ds.records) {
    row[0] = format_date(r.timestamp);
    row[1] = std::to_string(r.label);
    for (int j = 0; j < ds.feature_dim; ++j) row[static_cast<std::size_t>(j) + 2] = fnum(r.features[static_cast<std::size_t>(j)]);
    out.write_row(row);
  }
  out.close();
}

void write_clean_stats(const std::filesystem::path& dir, const RunArtifacts& art, const PipelineConfig& cfg) {
  json j = {{"duplicates_removed", art.clean_stats.duplicates_removed},
            {"missing_labels_removed", art.clean_stats.missing_labels_removed},
            {"out_of_range_removed", art.clean_stats.out_of_range_removed}};
  if (cfg.source == PipelineConfig::Source::ingest) {
    j["ingest"] = {{"rows_read", art.ingest_stats.rows_read},
                   {"dropped_bad_date", art.ingest_stats.dropped_bad_date},
                   {"dropped_out_of_range", art.ingest_stats.dropped_out_of_range},
                   {"dropped_missing_label", art.ingest_stats.dropped_missing_label},
                   {"dropped_malformed", art.ingest_stats.dropped_malformed}};
  }
  write_json_file(dir / "clean_stats.json", j);
}

json hyper_to_json(const HyperParams& hp) {
  return {{"learning_rate", hp.learning_rate},
          {"l2", hp.l2},
          {"epochs_per_batch", hp.epochs_per_batch},
          {"minibatch_size", hp.minibatch_size}};
}

void write_hyperparams(const std::filesystem::path& dir, const TuneResult& tune) {
  json trials = json::array();
  for (const TuneTrial& t : tune.trials) {
    json jt = {{"hyper", hyper_to_json(t.hyper)}};
    if (t.error.empty()) {
      jt["validation_auc"] = t.validation_auc;
    } else {
      jt["error"] = t.error;
    }
    trials.push_back(std::move(jt));
  }
  write_json_file(dir / "hyperparams.json",
                  {{"best", hyper_to_json(tune.best)}, {"best_trial", tune.best_trial}, {"trials", trials}});
}

void write_trajectories(const std::filesystem::path& dir, const std::vector<std::vector<ModelParams>>& snapshots) {
  CsvWriter out(dir / "params_trajectory.csv", {"replica_id", "batch_index", "param_index", "value"});
  for (std::size_t r = 0; r < snapshots.size(); ++r) {
    for (std::size_t b = 0; b < snapshots[r].size(); ++b) {
      const ModelParams& p = snapshots[r][b];
      const auto dim = p.weights.size();
      for (Eigen::Index j = 0; j <= dim; ++j) {
        out.write_row({std::to_string(r), std::to_string(b), std::to_string(j),
                       fnum(j < dim ? p.weights[j] : p.bias)});
      }
    }
  }
  out.close();
}

void write_forecasts(const std::filesystem::path& dir, const RunArtifacts& art, bool mean_mode) {
  CsvWriter out(dir / "forecast.csv", {"replica_id", "param_index", "target_batch", "forecast", "fallback_flag",
                                       "cv_degree", "cv_knots", "mape_when_realized", "delta"});
  for (const auto& [key, cell] : art.forecasts) {
    for (std::size_t r = 0; r < cell.per_replica.size(); ++r) {
      const ForecastResult& fr = cell.per_replica[r];
      const std::string rid = mean_mode ? "-1" : std::to_string(r);
      for (std::size_t p = 0; p < fr.per_param.size(); ++p) {
        const ParamForecast& pf = fr.per_param[p];
        out.write_row({rid, std::to_string(p), std::to_string(cell.target_batch), fnum(pf.value),
                       pf.fallback ? "1" : "0", std::to_string(pf.spec.degree), std::to_string(pf.spec.interior_knots),
                       fnum(pf.realized_ape), std::to_string(cell.delta)});
      }
    }
  }
  out.close();
}

void write_metrics(const std::filesystem::path& dir, const EvaluationReport& report) {
  CsvWriter out(dir / "metrics.csv",
                {"scenario", "delta", "test_batch", "metric", "mean", "ci_low", "ci_high", "skipped"});
  for (const MetricRow& row : report.rows) {
    if (row.skipped) {
      out.write_row({std::string(scenario_name(row.scenario)), std::to_string(row.delta),
                     std::to_string(row.test_batch), row.metric, "", "", "", "1"});
    } else {
      out.write_row({std::string(scenario_name(row.scenario)), std::to_string(row.delta),
                     std::to_string(row.test_batch), row.metric, fnum(row.mean), fnum(row.ci_low), fnum(row.ci_high),
                     "0"});
    }
  }
  out.close();
}

void write_prevalence(const std::filesystem::path& dir, const RunArtifacts& art) {
  CsvWriter out(dir / "prevalence.csv", {"batch", "period", "p_positive"});
  for (std::size_t b = 0; b < art.batches.size(); ++b) {
    out.write_row({std::to_string(art.batches[b].index), art.batches[b].label,
                   art.prevalence[b] ? fnum(*art.prevalence[b]) : ""});
  }
  out.close();
}

void write_distances(const std::filesystem::path& dir, const std::string& name, const Eigen::MatrixXd& D,
                     const std::vector<TemporalBatch>& batches) {
  CsvWriter out(dir / name, {"batch_a", "batch_b", "period_a", "period_b", "distance"});
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
      out.write_row({std::to_string(i), std::to_string(j), batches[static_cast<std::size_t>(i)].label,
                     batches[static_cast<std::size_t>(j)].label, fnum(D(i, j))});
    }
  }
  out.close();
}

void write_igt(const std::filesystem::path& dir, const std::string& name, const IgtProjection& igt,
               const std::vector<TemporalBatch>& batches) {
  std::vector<std::string> header = {"batch", "period"};
  for (Eigen::Index k = 0; k < igt.coordinates.cols(); ++k) header.push_back("dim" + std::to_string(k + 1));
  CsvWriter out(dir / name, header);
  for (Eigen::Index i = 0; i < igt.coordinates.rows(); ++i) {
    std::vector<std::string> row = {std::to_string(i), batches[static_cast<std::size_t>(i)].label};
    for (Eigen::Index k = 0; k < igt.coordinates.cols(); ++k) row.push_back(fnum(igt.coordinates(i, k)));
    out.write_row(row);
  }
  out.close();
}

json rows_to_json(const EvaluationReport& report) {
  json rows = json::array();
  for (const MetricRow& r : report.rows) {
    json jr = {{"scenario", std::string(scenario_name(r.scenario))},
               {"delta", r.delta},
               {"test_batch", r.test_batch},
               {"metric", r.metric},
               {"skipped", r.skipped}};
    if (r.skipped) {
      jr["skip_reason"] = r.skip_reason;
    } else {
      jr["mean"] = r.mean;
      jr["ci_low"] = r.ci_low;
      jr["ci_high"] = r.ci_high;
    }
    rows.push_back(std::move(jr));
  }
  return rows;
}

json forecast_quality(const RunArtifacts& art) {
  json out = json::object();
  std::map<int, std::pair<std::vector<double>, int>> per_delta;  // apes, fallback count
  std::map<int, int> totals;
  for (const auto& [key, cell] : art.forecasts) {
    auto& [apes, fallbacks] = per_delta[key.first];
    for (const ForecastResult& fr : cell.per_replica) {
      for (const ParamForecast& pf : fr.per_param) {
        apes.push_back(pf.realized_ape);
        fallbacks += pf.fallback ? 1 : 0;
        ++totals[key.first];
      }
    }
  }
  for (const auto& [delta, data] : per_delta) {
    const auto& [apes, fallbacks] = data;
    double mean = 0.0;
    for (const double a : apes) mean += a;
    mean /= apes.empty() ? 1.0 : static_cast<double>(apes.size());
    out[std::to_string(delta)] = {{"mape_mean_percent", mean},
                                  {"fallback_fraction",
                                   totals[delta] ? static_cast<double>(fallbacks) / totals[delta] : 0.0}};
  }
  return out;
}

void write_report(const std::filesystem::path& dir, const RunArtifacts& art, const PipelineConfig& cfg) {
  json quarters = json::array();
  for (std::size_t b = 0; b < art.batches.size(); ++b) {
    json q = {{"index", art.batches[b].index},
              {"period", art.batches[b].label},
              {"records", art.batches[b].record_ids.size()}};
    if (art.prevalence.size() == art.batches.size() && art.prevalence[b]) q["prevalence"] = *art.prevalence[b];
    quarters.push_back(std::move(q));
  }
  const json j = {{"version", kToolVersion},
                  {"config", config_to_json(cfg)},
                  {"seeds",
                   {{"master", cfg.master_seed},
                    {"data", resolved_sim_seed(cfg)},
                    {"tune", derive_seed(cfg.master_seed, "tune", 0)},
                    {"train", derive_seed(cfg.master_seed, "train", 0)}}},
                  {"quarters", quarters},
                  {"tuned", hyper_to_json(art.tune.best)},
                  {"rows", rows_to_json(art.evaluation)},
                  {"forecast_quality", forecast_quality(art)}};
  write_json_file(dir / "report.json", j);
}

}  // namespace

RunArtifacts cmd_run(const PipelineConfig& cfg) {
  RunArtifacts art = run_pipeline(cfg);
  const std::filesystem::path dir = ensure_out_dir(cfg);
  write_dataset_csv(dir, art.dataset);
  write_clean_stats(dir, art, cfg);
  write_hyperparams(dir, art.tune);
  write_trajectories(dir, art.snapshots);
  write_forecasts(dir, art, cfg.forecast.use_mean_trajectory);
  write_metrics(dir, art.evaluation);
  write_prevalence(dir, art);
  write_distances(dir, "distances.csv", art.dist_conditional, art.batches);
  write_distances(dir, "distances_marginal.csv", art.dist_marginal, art.batches);
  write_igt(dir, "igt_projection.csv", art.igt_conditional, art.batches);
  write_igt(dir, "igt_projection_marginal.csv", art.igt_marginal, art.batches);
  write_report(dir, art, cfg);
  std::vector<std::string> files = {"dataset.csv",  "clean_stats.json",        "hyperparams.json",
                                    "params_trajectory.csv", "forecast.csv",   "metrics.csv",
                                    "prevalence.csv",        "distances.csv",  "distances_marginal.csv",
                                    "igt_projection.csv",    "igt_projection_marginal.csv", "report.json"};
  if (cfg.export_splits) {
    write_split_manifest(dir / "splits.csv", art.splits);
    files.push_back("splits.csv");
  }
  manifest_update(cfg, files, /*fresh=*/true);
  return art;
}

// ---------------------------------------------------------------------------
// staged commands

namespace {

TemporalDataset load_dataset(const PipelineConfig& cfg) {
  manifest_require(cfg, {"dataset.csv"});
  const CsvTable table = read_csv_file(std::filesystem::path(cfg.out_dir) / "dataset.csv");
  if (table.header.size() < 3 || table.header[0] != "timestamp" || table.header[1] != "label") {
    throw ValidationError("dataset.csv must have columns timestamp,label,f0,...");
  }
  TemporalDataset ds;
  ds.feature_dim = static_cast<int>(table.header.size()) - 2;
  ds.records.reserve(table.rows.size());
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    if (row.size() != table.header.size()) {
      throw ValidationError("dataset.csv line " + std::to_string(line) + " has the wrong column count");
    }
    Record r;
    const auto d = parse_date(row[0]);
    if (!d) throw ValidationError("dataset.csv line " + std::to_string(line) + " has a bad timestamp: " + row[0]);
    r.timestamp = *d;
    if (row[1] != "0" && row[1] != "1") {
      throw ValidationError("dataset.csv line " + std::to_string(line) + " has a bad label: " + row[1]);
    }
    r.label = row[1] == "1" ? 1 : 0;
    r.features.resize(static_cast<std::size_t>(ds.feature_dim));
    for (int j = 0; j < ds.feature_dim; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(j) + 2];
      char* end = nullptr;
      r.features[static_cast<std::size_t>(j)] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ValidationError("dataset.csv line " + std::to_string(line) + " has a bad feature value: " + cell);
      }
    }
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw ValidationError("dataset.csv holds no records");
  if (!std::is_sorted(ds.records.begin(), ds.records.end(),
                      [](const Record& a, const Record& b) { return a.timestamp < b.timestamp; })) {
    throw ValidationError("dataset.csv records are not sorted by timestamp");
  }
  ds.date_start = ds.records.front().timestamp;
  ds.date_end = ds.records.back().timestamp;
  return ds;
}

int parse_int_cell(const std::string& cell, const char* what, std::size_t line, const char* file) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(cell, &used);
    if (used != cell.size()) throw std::invalid_argument("trail");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string(file) + " line " + std::to_string(line) + " has a bad " + what + ": " + cell);
  }
}

double parse_double_cell(const std::string& cell, const char* what, std::size_t line, const char* file) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) {
    throw ValidationError(std::string(file) + " line " + std::to_string(line) + " has a bad " + what + ": " + cell);
  }
  return v;
}

std::vector<std::vector<ModelParams>> load_trajectories(const PipelineConfig& cfg, const TemporalDataset& ds,
                                                        int q_count) {
  manifest_require(cfg, {"params_trajectory.csv"});
  const CsvTable table = read_csv_file(std::filesystem::path(cfg.out_dir) / "params_trajectory.csv");
  const std::vector<std::string> want = {"replica_id", "batch_index", "param_index", "value"};
  if (table.header != want) throw ValidationError("params_trajectory.csv has an unexpected header");
  const int dim = ds.feature_dim;
  std::vector<std::vector<ModelParams>> snaps(static_cast<std::size_t>(cfg.replicas));
  for (auto& replica : snaps) {
    replica.assign(static_cast<std::size_t>(q_count), ModelParams{});
    for (auto& p : replica) p.weights = Eigen::VectorXd::Zero(dim);
  }
  std::vector<std::vector<int>> filled(static_cast<std::size_t>(cfg.replicas),
                                       std::vector<int>(static_cast<std::size_t>(q_count), 0));
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    if (row.size() != 4) {
      throw ValidationError("params_trajectory.csv line " + std::to_string(line) + " has the wrong column count");
    }
    const int r = parse_int_cell(row[0], "replica_id", line, "params_trajectory.csv");
    const int b = parse_int_cell(row[1], "batch_index", line, "params_trajectory.csv");
    const int p = parse_int_cell(row[2], "param_index", line, "params_trajectory.csv");
    const double v = parse_double_cell(row[3], "value", line, "params_trajectory.csv");
    if (r < 0 || r >= cfg.replicas) {
      throw ValidationError("params_trajectory.csv line " + std::to_string(line) +
                            " names replica " + row[0] + " outside the configured replica count");
    }
    if (b < 0 || b >= q_count) {
      throw ValidationError("params_trajectory.csv line " + std::to_string(line) + " names batch " + row[1] +
                            " outside the dataset's quarter range");
    }
    if (p < 0 || p > dim) {
      throw ValidationError("params_trajectory.csv line " + std::to_string(line) + " names parameter " + row[2] +
                            " outside the model dimension");
    }
    ModelParams& mp = snaps[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)];
    if (p < dim) {
      mp.weights[p] = v;
    } else {
      mp.bias = v;
    }
    ++filled[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)];
  }
  for (int r = 0; r < cfg.replicas; ++r) {
    for (int b = 0; b < q_count; ++b) {
      if (filled[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)] != dim + 1) {
        throw ValidationError("params_trajectory.csv is incomplete: replica " + std::to_string(r) + " batch " +
                              std::to_string(b) + " does not carry exactly one row per parameter");
      }
    }
  }
  return snaps;
}

std::map<std::pair<int, int>, ForecastCell> load_forecasts(const PipelineConfig& cfg, const TemporalDataset& ds) {
  manifest_require(cfg, {"forecast.csv"});
  const CsvTable table = read_csv_file(std::filesystem::path(cfg.out_dir) / "forecast.csv");
  const std::vector<std::string> want = {"replica_id", "param_index", "target_batch", "forecast",
                                         "fallback_flag", "cv_degree", "cv_knots", "mape_when_realized", "delta"};
  if (table.header != want) throw ValidationError("forecast.csv has an unexpected header");
  const int dim = ds.feature_dim;

  struct Slot {
    std::map<int, std::vector<std::optional<ParamForecast>>> by_replica;
  };
  std::map<std::pair<int, int>, Slot> slots;
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    if (row.size() != 9) {
      throw ValidationError("forecast.csv line " + std::to_string(line) + " has the wrong column count");
    }
    const int r = parse_int_cell(row[0], "replica_id", line, "forecast.csv");
    const int p = parse_int_cell(row[1], "param_index", line, "forecast.csv");
    const int t = parse_int_cell(row[2], "target_batch", line, "forecast.csv");
    const int delta = parse_int_cell(row[8], "delta", line, "forecast.csv");
    if (p < 0 || p > dim) {
      throw ValidationError("forecast.csv line " + std::to_string(line) + " names parameter " + row[1] +
                            " outside the model dimension");
    }
    ParamForecast pf;
    pf.value = parse_double_cell(row[3], "forecast", line, "forecast.csv");
    pf.fallback = row[4] == "1";
    pf.spec.degree = parse_int_cell(row[5], "cv_degree", line, "forecast.csv");
    pf.spec.interior_knots = parse_int_cell(row[6], "cv_knots", line, "forecast.csv");
    pf.realized_ape = parse_double_cell(row[7], "mape_when_realized", line, "forecast.csv");
    auto& vec = slots[{delta, t}].by_replica[r];
    if (vec.empty()) vec.resize(static_cast<std::size_t>(dim) + 1);
    vec[static_cast<std::size_t>(p)] = pf;
  }

  std::map<std::pair<int, int>, ForecastCell> cells;
  for (auto& [key, slot] : slots) {
    ForecastCell cell;
    cell.delta = key.first;
    cell.target_batch = key.second;
    for (auto& [r, vec] : slot.by_replica) {
      ForecastResult fr;
      fr.target_time = key.second;
      fr.params.weights = Eigen::VectorXd::Zero(dim);
      fr.per_param.reserve(vec.size());
      for (std::size_t p = 0; p < vec.size(); ++p) {
        if (!vec[p]) {
          throw ValidationError("forecast.csv is incomplete: delta " + std::to_string(key.first) + " target " +
                                std::to_string(key.second) + " replica " + std::to_string(r) +
                                " is missing parameter " + std::to_string(p));
        }
        if (p < static_cast<std::size_t>(dim)) {
          fr.params.weights[static_cast<Eigen::Index>(p)] = vec[p]->value;
        } else {
          fr.params.bias = vec[p]->value;
        }
        fr.per_param.push_back(*vec[p]);
      }
      cell.per_replica.push_back(std::move(fr));
    }
    cells.emplace(key, std::move(cell));
  }
  return cells;
}

void reject_retune_for_staged(const PipelineConfig& cfg) {
  if (cfg.tune.retune_per_horizon) {
    throw ValidationError("tune.retune_per_horizon is only supported by the run command");
  }
}

}  // namespace

void cmd_simulate(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.source != PipelineConfig::Source::simulate) {
    throw ValidationError("simulate requires source=simulate in the config");
  }
  DataStage data = stage_data(cfg);
  const std::filesystem::path dir = ensure_out_dir(cfg);
  write_dataset_csv(dir, data.dataset);
  RunArtifacts art;
  art.clean_stats = data.clean_stats;
  art.ingest_stats = data.ingest_stats;
  write_clean_stats(dir, art, cfg);
  manifest_update(cfg, {"dataset.csv", "clean_stats.json"}, /*fresh=*/false);
}

void cmd_ingest(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.source != PipelineConfig::Source::ingest) {
    throw ValidationError("ingest requires source=ingest and ingest.path in the config");
  }
  DataStage data = stage_data(cfg);
  const std::filesystem::path dir = ensure_out_dir(cfg);
  write_dataset_csv(dir, data.dataset);
  RunArtifacts art;
  art.clean_stats = data.clean_stats;
  art.ingest_stats = data.ingest_stats;
  write_clean_stats(dir, art, cfg);
  manifest_update(cfg, {"dataset.csv", "clean_stats.json"}, /*fresh=*/false);
}

void cmd_characterize(const PipelineConfig& cfg) {
  cfg.validate();
  const TemporalDataset ds = load_dataset(cfg);
  if (cfg.characterize.feature >= ds.feature_dim) {
    throw ValidationError("characterize.feature " + std::to_string(cfg.characterize.feature) +
                          " is out of range for feature_dim " + std::to_string(ds.feature_dim));
  }
  const std::vector<TemporalBatch> batches = batch_by_quarter(ds);
  RunArtifacts art;
  art.prevalence = prevalence_series(ds, batches);

  const auto f = static_cast<std::size_t>(cfg.characterize.feature);
  std::vector<double> pooled;
  pooled.reserve(ds.size());
  for (const Record& r : ds.records) pooled.push_back(r.features[f]);
  const std::vector<double> edges = histogram_edges(pooled, cfg.characterize.bins);
  std::vector<BatchPdf> marginal(batches.size()), conditional(batches.size());
  for (std::size_t b = 0; b < batches.size(); ++b) {
    std::vector<double> values;
    std::vector<int> labels;
    for (const std::uint32_t id : batches[b].record_ids) {
      values.push_back(ds.records[id].features[f]);
      labels.push_back(ds.records[id].label);
    }
    marginal[b] = {batches[b].index, histogram_masses(values, edges), values.empty()};
    conditional[b] = conditional_concat_pdf(values, labels, edges);
    conditional[b].batch_index = batches[b].index;
  }
  const Eigen::MatrixXd dist_marginal = distance_matrix(marginal);
  const Eigen::MatrixXd dist_conditional = distance_matrix(conditional);
  const IgtProjection igt_marginal = igt_project(dist_marginal, cfg.characterize.igt_dims);
  const IgtProjection igt_conditional = igt_project(dist_conditional, cfg.characterize.igt_dims);

  const std::filesystem::path dir(cfg.out_dir);
  art.batches = batches;
  write_prevalence(dir, art);
  write_distances(dir, "distances.csv", dist_conditional, batches);
  write_distances(dir, "distances_marginal.csv", dist_marginal, batches);
  write_igt(dir, "igt_projection.csv", igt_conditional, batches);
  write_igt(dir, "igt_projection_marginal.csv", igt_marginal, batches);
  manifest_update(cfg,
                  {"prevalence.csv", "distances.csv", "distances_marginal.csv", "igt_projection.csv",
                   "igt_projection_marginal.csv"},
                  /*fresh=*/false);
}

void cmd_train(const PipelineConfig& cfg) {
  cfg.validate();
  reject_retune_for_staged(cfg);
  const TemporalDataset ds = load_dataset(cfg);
  const std::vector<TemporalBatch> batches = batch_by_quarter(ds);
  const std::vector<SplitBatch> splits = stage_splits(cfg, ds, batches);
  const TrainedSeq seq = tune_and_train(cfg, ds, std::span<const SplitBatch>{splits}, 0);
  const std::filesystem::path dir(cfg.out_dir);
  write_hyperparams(dir, seq.tune);
  write_trajectories(dir, seq.snaps);
  std::vector<std::string> files = {"hyperparams.json", "params_trajectory.csv"};
  if (cfg.export_splits) {
    write_split_manifest(dir / "splits.csv", splits);
    files.push_back("splits.csv");
  }
  manifest_update(cfg, files, /*fresh=*/false);
}

void cmd_forecast(const PipelineConfig& cfg) {
  cfg.validate();
  reject_retune_for_staged(cfg);
  const TemporalDataset ds = load_dataset(cfg);
  const std::vector<TemporalBatch> batches = batch_by_quarter(ds);
  const int q_count = static_cast<int>(batches.size());
  const std::vector<std::vector<ModelParams>> snaps = load_trajectories(cfg, ds, q_count);

  RunArtifacts art;
  const std::vector<ModelParams> means =
      cfg.forecast.use_mean_trajectory ? mean_snapshots(snaps) : std::vector<ModelParams>{};
  for (const int delta : cfg.deltas) {
    if (delta == 0) continue;
    for (int t = delta + 1; t < q_count; ++t) {
      const int h = t - delta;
      ForecastCell cell;
      cell.delta = delta;
      cell.target_batch = t;
      if (cfg.forecast.use_mean_trajectory) {
        const std::vector<ModelParams> hist(means.begin(), means.begin() + h + 1);
        cell.per_replica.resize(1);
        cell.per_replica[0] = forecast_one(hist, delta, cfg.forecast.candidates, means[static_cast<std::size_t>(t)]);
      } else {
        cell.per_replica.resize(static_cast<std::size_t>(cfg.replicas));
        parallel_for(cfg.replicas, cfg.threads, [&](int r) {
          const auto& full = snaps[static_cast<std::size_t>(r)];
          const std::vector<ModelParams> hist(full.begin(), full.begin() + h + 1);
          cell.per_replica[static_cast<std::size_t>(r)] =
              forecast_one(hist, delta, cfg.forecast.candidates, full[static_cast<std::size_t>(t)]);
        });
      }
      art.forecasts.emplace(std::make_pair(delta, t), std::move(cell));
    }
  }
  write_forecasts(std::filesystem::path(cfg.out_dir), art, cfg.forecast.use_mean_trajectory);
  manifest_update(cfg, {"forecast.csv"}, /*fresh=*/false);
}

void cmd_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  reject_retune_for_staged(cfg);
  const TemporalDataset ds = load_dataset(cfg);
  const std::vector<TemporalBatch> batches = batch_by_quarter(ds);
  const int q_count = static_cast<int>(batches.size());
  const std::vector<SplitBatch> splits = stage_splits(cfg, ds, batches);
  const std::vector<std::vector<ModelParams>> snaps = load_trajectories(cfg, ds, q_count);
  const std::map<std::pair<int, int>, ForecastCell> forecasts = load_forecasts(cfg, ds);
  manifest_require(cfg, {"hyperparams.json"});
  const json hyper = read_json_file(std::filesystem::path(cfg.out_dir) / "hyperparams.json");

  RunArtifacts art;
  art.dataset = ds;
  art.batches = batches;
  art.splits = splits;
  art.snapshots = snaps;
  art.forecasts = forecasts;
  art.prevalence = prevalence_series(ds, batches);
  art.tune.best.learning_rate = hyper.at("best").value("learning_rate", 0.0);
  art.tune.best.l2 = hyper.at("best").value("l2", 0.0);
  art.tune.best.epochs_per_batch = hyper.at("best").value("epochs_per_batch", 0);
  art.tune.best.minibatch_size = hyper.at("best").value("minibatch_size", 0);

  ScenarioProviders providers;
  providers.baseline = [&](int delta, int t, int r) -> std::optional<ModelParams> {
    return art.snapshots[static_cast<std::size_t>(r)][static_cast<std::size_t>(t - delta)];
  };
  providers.upper_bound = [&](int t, int r) -> std::optional<ModelParams> {
    return art.snapshots[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)];
  };
  providers.pro_adaptive = [&](int delta, int t, int r) -> std::optional<ModelParams> {
    const auto it = art.forecasts.find({delta, t});
    if (it == art.forecasts.end()) return std::nullopt;
    const auto& per = it->second.per_replica;
    if (per.size() == 1) return per[0].params;
    if (static_cast<std::size_t>(r) >= per.size()) return std::nullopt;
    return per[static_cast<std::size_t>(r)].params;
  };
  art.evaluation = run_scenarios(ds, std::span<const SplitBatch>{splits}, cfg.replicas, providers, cfg.deltas);

  const std::filesystem::path dir(cfg.out_dir);
  write_metrics(dir, art.evaluation);
  write_report(dir, art, cfg);
  manifest_update(cfg, {"metrics.csv", "report.json"}, /*fresh=*/false);
}

std::string cmd_report(const PipelineConfig& cfg) {
  cfg.validate();
  manifest_require(cfg, {"report.json"});
  const json j = read_json_file(std::filesystem::path(cfg.out_dir) / "report.json");

  std::ostringstream out;
  const auto& quarters = j.at("quarters");
  out << "run summary (version " << j.value("version", "?") << ")\n";
  out << "quarters: " << quarters.size();
  if (!quarters.empty()) {
    out << " (" << quarters.front().value("period", "?") << " .. " << quarters.back().value("period", "?") << ")";
  }
  out << "\n";
  if (j.contains("tuned")) {
    const auto& t = j.at("tuned");
    out << "tuned: learning_rate=" << format_double(t.value("learning_rate", 0.0))
        << " l2=" << format_double(t.value("l2", 0.0)) << " epochs_per_batch=" << t.value("epochs_per_batch", 0)
        << " minibatch_size=" << t.value("minibatch_size", 0) << "\n";
  }

  // one AUC table per delta: batch rows, scenario columns
  std::set<int> deltas;
  for (const auto& row : j.at("rows")) deltas.insert(row.value("delta", 0));
  for (const int delta : deltas) {
    out << "\nauc by test batch, delta=" << delta << " (mean [95% ci])\n";
    char line[160];
    std::snprintf(line, sizeof line, "%5s  %-8s  %-26s  %-26s  %-26s\n", "batch", "period", "baseline",
                  "pro_adaptive", "upper_bound");
    out << line;
    std::map<std::pair<int, std::string>, std::string> cells;
    int max_batch = -1;
    for (const auto& row : j.at("rows")) {
      if (row.value("delta", 0) != delta || row.value("metric", "") != "auc") continue;
      const int t = row.value("test_batch", 0);
      max_batch = std::max(max_batch, t);
      std::string text;
      if (row.value("skipped", false)) {
        text = "--";
      } else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f [%.3f, %.3f]", row.value("mean", 0.0), row.value("ci_low", 0.0),
                      row.value("ci_high", 0.0));
        text = buf;
      }
      cells[{t, row.value("scenario", "")}] = text;
    }
    for (int t = 0; t <= max_batch; ++t) {
      const std::string period =
          t < static_cast<int>(quarters.size()) ? quarters[static_cast<std::size_t>(t)].value("period", "?") : "?";
      std::snprintf(line, sizeof line, "%5d  %-8s  %-26s  %-26s  %-26s\n", t, period.c_str(),
                    cells[{t, "baseline"}].empty() ? "--" : cells[{t, "baseline"}].c_str(),
                    cells[{t, "pro_adaptive"}].empty() ? "--" : cells[{t, "pro_adaptive"}].c_str(),
                    cells[{t, "upper_bound"}].empty() ? "--" : cells[{t, "upper_bound"}].c_str());
      out << line;
    }
  }
  return out.str();
}

}  // namespace proadapt
