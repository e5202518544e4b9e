#include "proadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "proadapt/common.hpp"

namespace proadapt {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels lengths differ");
  if (scores.empty()) throw ValidationError("AUC needs at least one observation");
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw ValidationError("scores must be finite");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("AUC undefined: test labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const auto p = static_cast<double>(n_pos);
  const auto q = static_cast<double>(n_neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

ClassificationStats recall_and_macro_f1(const std::vector<double>& probs, const std::vector<int>& labels,
                                        double threshold) {
  if (probs.size() != labels.size()) throw ValidationError("probs and labels lengths differ");
  if (probs.empty()) throw ValidationError("classification metrics need at least one observation");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("labels must be 0 or 1");
    const bool pred = probs[i] >= threshold;
    if (labels[i] == 1) {
      pred ? ++tp : ++fn;
    } else {
      pred ? ++fp : ++tn;
    }
  }
  if (tp + fn == 0 || fp + tn == 0) {
    throw ValidationError("recall undefined: test labels contain a single class");
  }
  auto f1 = [](double tpos, double fpos, double fneg) {
    const double den = 2.0 * tpos + fpos + fneg;
    return den == 0.0 ? 1.0 : 2.0 * tpos / den;
  };
  ClassificationStats out;
  out.recall_pos = tp / (tp + fn);
  out.macro_f1 = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
  return out;
}

CiStat aggregate_ci(std::vector<double> values, double level) {
  if (values.size() < 2) throw ValidationError("confidence interval needs at least 2 values");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  for (const double v : values) {
    if (!std::isfinite(v)) throw ValidationError("confidence interval values must be finite");
  }
  CiStat out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const auto pct = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - std::floor(pos);
    return values[lo] + (values[hi] - values[lo]) * frac;
  };
  const double alpha = (1.0 - level) / 2.0;
  out.lo = pct(alpha);
  out.hi = pct(1.0 - alpha);
  return out;
}

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::pro_adaptive: return "pro_adaptive";
    case Scenario::upper_bound: return "upper_bound";
  }
  return "unknown";
}

namespace {

struct TestSet {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  bool single_class = false;
};

}  // namespace

EvaluationReport run_scenarios(const TemporalDataset& ds, std::span<const SplitBatch> splits, int n_replicas,
                               const ScenarioProviders& providers, const std::vector<int>& deltas) {
  if (splits.empty()) throw ValidationError("no batches to evaluate");
  if (n_replicas < 2) throw ValidationError("scenario evaluation needs at least 2 replicas");
  if (deltas.empty()) throw ValidationError("no deltas to evaluate");
  for (const int d : deltas) {
    if (d < 0) throw ValidationError("delta must be >= 0");
  }
  if (!providers.baseline || !providers.pro_adaptive || !providers.upper_bound) {
    throw ValidationError("all three scenario providers must be set");
  }

  const int q_count = static_cast<int>(splits.size());
  std::vector<TestSet> tests(static_cast<std::size_t>(q_count));
  for (int t = 0; t < q_count; ++t) {
    TestSet& ts = tests[static_cast<std::size_t>(t)];
    const XY xy = gather_xy(ds, splits[static_cast<std::size_t>(t)].test);
    ts.X = xy.X;
    ts.labels.resize(static_cast<std::size_t>(xy.y.size()));
    int pos = 0;
    for (Eigen::Index i = 0; i < xy.y.size(); ++i) {
      ts.labels[static_cast<std::size_t>(i)] = static_cast<int>(xy.y[i]);
      pos += ts.labels[static_cast<std::size_t>(i)];
    }
    ts.single_class = pos == 0 || pos == static_cast<int>(ts.labels.size());
  }

  EvaluationReport report;
  const Scenario order[] = {Scenario::baseline, Scenario::pro_adaptive, Scenario::upper_bound};
  const char* metric_names[] = {"auc", "recall", "macro_f1"};

  for (const int delta : deltas) {
    for (int t = 0; t < q_count; ++t) {
      for (const Scenario scenario : order) {
        std::string skip;
        if (scenario != Scenario::upper_bound && t - delta < 0) {
          skip = "training horizon precedes the first batch";
        } else if (scenario == Scenario::pro_adaptive && delta == 0) {
          skip = "zero forecast horizon: nothing to forecast";
        } else if (tests[static_cast<std::size_t>(t)].single_class) {
          skip = "test split has a single class";
        }

        CellValues cell;
        cell.scenario = scenario;
        cell.delta = delta;
        cell.test_batch = t;
        if (skip.empty()) {
          const TestSet& ts = tests[static_cast<std::size_t>(t)];
          for (int r = 0; r < n_replicas && skip.empty(); ++r) {
            std::optional<ModelParams> params;
            switch (scenario) {
              case Scenario::baseline: params = providers.baseline(delta, t, r); break;
              case Scenario::pro_adaptive: params = providers.pro_adaptive(delta, t, r); break;
              case Scenario::upper_bound: params = providers.upper_bound(t, r); break;
            }
            if (!params) {
              skip = "no model available for this cell";
              break;
            }
            const Eigen::VectorXd probs = predict_proba(*params, ts.X);
            const std::vector<double> scores(probs.data(), probs.data() + probs.size());
            cell.auc.push_back(roc_auc(scores, ts.labels));
            const ClassificationStats cs = recall_and_macro_f1(scores, ts.labels);
            cell.recall.push_back(cs.recall_pos);
            cell.macro_f1.push_back(cs.macro_f1);
          }
        }

        for (int m = 0; m < 3; ++m) {
          MetricRow row;
          row.scenario = scenario;
          row.delta = delta;
          row.test_batch = t;
          row.metric = metric_names[m];
          if (!skip.empty()) {
            row.skipped = true;
            row.skip_reason = skip;
          } else {
            const std::vector<double>& vals = m == 0 ? cell.auc : m == 1 ? cell.recall : cell.macro_f1;
            const CiStat ci = aggregate_ci(vals);
            row.mean = ci.mean;
            row.ci_low = ci.lo;
            row.ci_high = ci.hi;
          }
          report.rows.push_back(std::move(row));
        }
        if (skip.empty()) report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

}  // namespace proadapt
