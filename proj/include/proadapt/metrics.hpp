#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proadapt/glm.hpp"

namespace proadapt {

// Mann-Whitney formulation with midranks, so ties contribute half. Labels must
// contain both classes.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ClassificationStats {
  double recall_pos = 0.0;
  double macro_f1 = 0.0;
};

// Positive prediction at probability >= threshold. A class with no actual and
// no predicted members scores F1 = 1 for the macro average.
ClassificationStats recall_and_macro_f1(const std::vector<double>& probs, const std::vector<int>& labels,
                                        double threshold = 0.5);

struct CiStat {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile interval with linear interpolation between order statistics.
CiStat aggregate_ci(std::vector<double> values, double level = 0.95);

enum class Scenario { baseline, pro_adaptive, upper_bound };

std::string_view scenario_name(Scenario s);

struct MetricRow {
  Scenario scenario = Scenario::baseline;
  int delta = 0;
  int test_batch = 0;
  std::string metric;  // "auc", "recall", "macro_f1"
  bool skipped = false;
  std::string skip_reason;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct CellValues {
  Scenario scenario = Scenario::baseline;
  int delta = 0;
  int test_batch = 0;
  std::vector<double> auc, recall, macro_f1;  // one entry per replica
};

struct EvaluationReport {
  std::vector<MetricRow> rows;    // delta-major, then batch, scenario, metric
  std::vector<CellValues> cells;  // evaluated cells only
};

// Returns the parameters to score a cell with, or nullopt when the cell has no
// usable model (which marks the cell skipped).
struct ScenarioProviders {
  std::function<std::optional<ModelParams>(int delta, int test_batch, int replica)> baseline;
  std::function<std::optional<ModelParams>(int delta, int test_batch, int replica)> pro_adaptive;
  std::function<std::optional<ModelParams>(int test_batch, int replica)> upper_bound;
};

// Scores every (scenario, delta, batch) cell on the batch's held-out test
// split across replicas. Cells that cannot be evaluated (history before the
// first batch, zero forecast horizon, missing model, single-class test split)
// appear as skipped rows instead of vanishing.
EvaluationReport run_scenarios(const TemporalDataset& ds, std::span<const SplitBatch> splits, int n_replicas,
                               const ScenarioProviders& providers, const std::vector<int>& deltas);

}  // namespace proadapt
