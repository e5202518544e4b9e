#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "proadapt/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"quarterly incremental training, parameter forecasting, and scenario evaluation under dataset shift"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int replicas = 0;
  std::vector<int> deltas;
  auto* opt_config = app.add_option("--config", config_path, "JSON config file");
  auto* opt_seed = app.add_option("--seed", seed, "master seed override");
  auto* opt_out = app.add_option("--out", out_dir, "output directory override");
  auto* opt_replicas = app.add_option("--replicas", replicas, "bootstrap replica count override");
  auto* opt_delta = app.add_option("--delta", deltas, "forecast horizon override, repeatable");

  auto* sc_simulate = app.add_subcommand("simulate", "generate the synthetic dataset and write dataset.csv");
  auto* sc_ingest = app.add_subcommand("ingest", "hash a raw CSV into dataset.csv");
  auto* sc_run = app.add_subcommand("run", "full pipeline: data, training, forecasts, evaluation, characterization");
  auto* sc_train = app.add_subcommand("train", "tune and train incrementally over the persisted dataset");
  auto* sc_forecast = app.add_subcommand("forecast", "forecast parameter trajectories from persisted snapshots");
  auto* sc_evaluate = app.add_subcommand("evaluate", "score the three scenarios and write metrics.csv");
  auto* sc_characterize = app.add_subcommand("characterize", "distribution distances and shift projection per batch");
  auto* sc_report = app.add_subcommand("report", "render report.json as a text summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    proadapt::PipelineConfig cfg;
    if (opt_config->count()) cfg = proadapt::load_config(config_path);
    if (opt_seed->count()) cfg.master_seed = seed;
    if (opt_out->count()) cfg.out_dir = out_dir;
    if (opt_replicas->count()) cfg.replicas = replicas;
    if (opt_delta->count()) cfg.deltas = deltas;

    if (app.got_subcommand(sc_run)) {
      const proadapt::RunArtifacts art = proadapt::cmd_run(cfg);
      std::cout << "records: " << art.dataset.size() << "  quarters: " << art.batches.size()
                << "  replicas: " << cfg.replicas << "\n"
                << "artifacts in " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_simulate)) {
      proadapt::cmd_simulate(cfg);
      std::cout << "dataset.csv written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_ingest)) {
      proadapt::cmd_ingest(cfg);
      std::cout << "dataset.csv written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_train)) {
      proadapt::cmd_train(cfg);
      std::cout << "hyperparams.json and params_trajectory.csv written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_forecast)) {
      proadapt::cmd_forecast(cfg);
      std::cout << "forecast.csv written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_evaluate)) {
      proadapt::cmd_evaluate(cfg);
      std::cout << "metrics.csv and report.json written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_characterize)) {
      proadapt::cmd_characterize(cfg);
      std::cout << "characterization tables written to " << cfg.out_dir << "\n";
    } else if (app.got_subcommand(sc_report)) {
      std::cout << proadapt::cmd_report(cfg);
    }
    return 0;
  } catch (const proadapt::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const proadapt::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
