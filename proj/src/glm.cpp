#include "proadapt/glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "proadapt/common.hpp"
#include "proadapt/metrics.hpp"
#include "proadapt/rng.hpp"

namespace proadapt {

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd predict_proba(const ModelParams& params, const Eigen::MatrixXd& X) {
  if (X.cols() != params.weights.size()) {
    throw ValidationError("feature dimension " + std::to_string(X.cols()) + " does not match model dimension " +
                          std::to_string(params.weights.size()));
  }
  Eigen::VectorXd z = X * params.weights;
  Eigen::VectorXd p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) p[i] = sigmoid(z[i] + params.bias);
  return p;
}

LossGrad loss_and_gradient(const ModelParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double l2) {
  if (X.rows() != y.size()) throw ValidationError("X and y row counts differ");
  if (X.rows() < 1) throw ValidationError("loss needs at least one row");
  if (l2 < 0.0) throw ValidationError("l2 must be >= 0");
  const Eigen::VectorXd p = predict_proba(params, X);
  const auto n = static_cast<double>(X.rows());

  double nll = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
    nll -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }

  LossGrad out;
  out.loss = nll / n + 0.5 * l2 * params.weights.squaredNorm();
  const Eigen::VectorXd d = p - y;
  out.grad_weights = X.transpose() * d / n + l2 * params.weights;
  out.grad_bias = d.mean();
  return out;
}

XY gather_xy(const TemporalDataset& ds, const std::vector<std::uint32_t>& ids) {
  if (ids.empty()) throw ValidationError("cannot gather an empty id list");
  XY xy;
  xy.X.resize(static_cast<Eigen::Index>(ids.size()), ds.feature_dim);
  xy.y.resize(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Record& r = ds.records.at(ids[i]);
    if (static_cast<int>(r.features.size()) != ds.feature_dim) {
      throw ValidationError("record feature width does not match dataset feature_dim");
    }
    for (int j = 0; j < ds.feature_dim; ++j) xy.X(static_cast<Eigen::Index>(i), j) = r.features[static_cast<std::size_t>(j)];
    xy.y[static_cast<Eigen::Index>(i)] = r.label;
  }
  return xy;
}

namespace {

void validate_hyper(const HyperParams& hp) {
  if (!(hp.learning_rate >= 0.0) || !std::isfinite(hp.learning_rate)) {
    throw ValidationError("learning_rate must be finite and >= 0");
  }
  if (hp.epochs_per_batch < 0) throw ValidationError("epochs_per_batch must be >= 0");
  if (hp.minibatch_size < 1) throw ValidationError("minibatch_size must be >= 1");
  if (!(hp.l2 >= 0.0) || !std::isfinite(hp.l2)) throw ValidationError("l2 must be finite and >= 0");
}

std::string hyper_text(const HyperParams& hp) {
  return "learning_rate=" + format_double(hp.learning_rate) + ", l2=" + format_double(hp.l2) +
         ", epochs_per_batch=" + std::to_string(hp.epochs_per_batch) +
         ", minibatch_size=" + std::to_string(hp.minibatch_size);
}

}  // namespace

TrainState train_epochs(TrainState state, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp) {
  validate_hyper(hp);
  if (X.rows() != y.size()) throw ValidationError("X and y row counts differ");
  if (X.rows() < 1) throw ValidationError("training needs at least one row");
  if (X.cols() != state.params.weights.size()) {
    throw ValidationError("feature dimension " + std::to_string(X.cols()) + " does not match model dimension " +
                          std::to_string(state.params.weights.size()));
  }

  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(state.rng_seed);
  ModelParams& m = state.params;

  for (int epoch = 0; epoch < hp.epochs_per_batch; ++epoch) {
    rng.shuffle(order);
    for (std::size_t beg = 0; beg < n; beg += static_cast<std::size_t>(hp.minibatch_size)) {
      const std::size_t end = std::min(n, beg + static_cast<std::size_t>(hp.minibatch_size));
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(beg),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
      const Eigen::MatrixXd Xb = X(idx, Eigen::all);
      const Eigen::VectorXd yb = y(idx);
      const LossGrad g = loss_and_gradient(m, Xb, yb, hp.l2);
      m.weights -= hp.learning_rate * g.grad_weights;
      m.bias -= hp.learning_rate * g.grad_bias;
      if (!m.weights.allFinite() || !std::isfinite(m.bias)) {
        throw std::runtime_error("training diverged to non-finite parameters (" + hyper_text(hp) + ")");
      }
    }
  }
  ++state.batches_seen;
  state.rng_seed = splitmix64(state.rng_seed);
  return state;
}

std::vector<ModelParams> train_incremental(const TemporalDataset& ds, std::span<const SplitBatch> splits,
                                           int replica_id, const HyperParams& hp, std::uint64_t seed) {
  if (splits.empty()) throw ValidationError("no batches to train on");
  if (replica_id < 0) throw ValidationError("replica_id must be >= 0");

  TrainState state;
  state.params.weights = Eigen::VectorXd::Zero(ds.feature_dim);
  state.rng_seed = splitmix64(seed ^ static_cast<std::uint64_t>(replica_id));

  std::vector<ModelParams> snapshots;
  snapshots.reserve(splits.size());
  for (const SplitBatch& sb : splits) {
    if (replica_id >= static_cast<int>(sb.replicas.size())) {
      throw ValidationError("replica " + std::to_string(replica_id) + " missing in batch " +
                            std::to_string(sb.batch_index));
    }
    const XY xy = gather_xy(ds, sb.replicas[static_cast<std::size_t>(replica_id)].record_ids);
    state = train_epochs(std::move(state), xy.X, xy.y, hp);
    snapshots.push_back(state.params);
  }
  return snapshots;
}

void HyperSearchSpace::validate() const {
  if (!(lr_min > 0.0) || lr_max < lr_min) throw ValidationError("learning_rate range must satisfy 0 < min <= max");
  if (!(l2_min > 0.0) || l2_max < l2_min) throw ValidationError("l2 range must satisfy 0 < min <= max");
  if (epochs_min < 1 || epochs_max < epochs_min) throw ValidationError("epochs range must satisfy 1 <= min <= max");
  if (minibatch_min < 1 || minibatch_max < minibatch_min) {
    throw ValidationError("minibatch range must satisfy 1 <= min <= max");
  }
}

TuneResult tune_hyperparameters(const TemporalDataset& ds, std::span<const SplitBatch> splits,
                                const HyperSearchSpace& space, int budget, std::uint64_t seed) {
  space.validate();
  if (budget < 1) throw ValidationError("tuning budget must be >= 1");
  if (splits.empty()) throw ValidationError("tuning needs at least one batch");

  // All configurations are drawn up front so the sampling stream does not
  // depend on trial outcomes.
  Rng sampler(derive_seed(seed, "sample"));
  const std::uint64_t train_seed = derive_seed(seed, "train");
  TuneResult res;
  res.trials.resize(static_cast<std::size_t>(budget));
  for (TuneTrial& t : res.trials) {
    t.hyper.learning_rate = std::exp(std::lerp(std::log(space.lr_min), std::log(space.lr_max), sampler.uniform01()));
    t.hyper.l2 = std::exp(std::lerp(std::log(space.l2_min), std::log(space.l2_max), sampler.uniform01()));
    t.hyper.epochs_per_batch =
        space.epochs_min + static_cast<int>(sampler.below(static_cast<std::uint64_t>(space.epochs_max - space.epochs_min + 1)));
    t.hyper.minibatch_size = space.minibatch_min +
                             static_cast<int>(sampler.below(static_cast<std::uint64_t>(space.minibatch_max - space.minibatch_min + 1)));
  }

  const SplitBatch& last = splits.back();
  const XY val = gather_xy(ds, last.validation);
  std::vector<int> val_labels(static_cast<std::size_t>(val.y.size()));
  for (Eigen::Index i = 0; i < val.y.size(); ++i) val_labels[static_cast<std::size_t>(i)] = static_cast<int>(val.y[i]);

  for (TuneTrial& t : res.trials) {
    try {
      const std::vector<ModelParams> snaps = train_incremental(ds, splits, 0, t.hyper, train_seed);
      const Eigen::VectorXd probs = predict_proba(snaps.back(), val.X);
      const std::vector<double> scores(probs.data(), probs.data() + probs.size());
      t.validation_auc = roc_auc(scores, val_labels);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::runtime_error& e) {
      t.error = e.what();
    }
  }

  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    const TuneTrial& t = res.trials[i];
    if (!t.error.empty() || std::isnan(t.validation_auc)) continue;
    if (res.best_trial < 0 || t.validation_auc > res.trials[static_cast<std::size_t>(res.best_trial)].validation_auc) {
      res.best_trial = static_cast<int>(i);
    }
  }
  if (res.best_trial < 0) {
    std::string detail;
    for (std::size_t i = 0; i < res.trials.size(); ++i) {
      detail += "\n  trial " + std::to_string(i) + " (" + hyper_text(res.trials[i].hyper) + "): " + res.trials[i].error;
    }
    throw std::runtime_error("all " + std::to_string(budget) + " tuning trials diverged:" + detail);
  }
  res.best = res.trials[static_cast<std::size_t>(res.best_trial)].hyper;
  return res;
}

}  // namespace proadapt
