#include <doctest.h>

#include <cmath>

#include "proadapt/common.hpp"
#include "proadapt/dataset.hpp"
#include "proadapt/glm.hpp"
#include "proadapt/partition.hpp"
#include "proadapt/rng.hpp"

using namespace proadapt;

namespace {

// Two-class Gaussian blobs in one quarter, linearly separable when gap is wide.
TemporalDataset blobs(int n_per_class, double center, std::uint64_t seed) {
  TemporalDataset ds;
  ds.feature_dim = 2;
  Rng rng(seed);
  const Date base = *parse_date("2021-01-01");
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int label = i % 2;
    const double mu = label == 1 ? center : -center;
    ds.records.push_back({base + std::chrono::days{i % 85}, label, {mu + rng.normal(), mu + rng.normal()}});
  }
  std::stable_sort(ds.records.begin(), ds.records.end(),
                   [](const Record& a, const Record& b) { return a.timestamp < b.timestamp; });
  ds.date_start = ds.records.front().timestamp;
  ds.date_end = ds.records.back().timestamp;
  return ds;
}

}  // namespace

TEST_CASE("sigmoid is stable at extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(40.0) > 1.0 - 1e-15);
  CHECK(sigmoid(-40.0) < 1e-15);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
}

TEST_CASE("loss and gradient at the origin match the closed form") {
  ModelParams p;
  p.weights = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  Eigen::VectorXd y(1);
  y << 1.0;
  const LossGrad lg = loss_and_gradient(p, X, y, 0.0);
  CHECK(lg.loss == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(lg.grad_weights[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(lg.grad_bias == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("analytic gradient agrees with central differences") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(4));
    const int n = 3 + static_cast<int>(rng.below(20));
    ModelParams p;
    p.weights = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
    p.bias = rng.normal();
    Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(n, d, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return double(rng.below(2)); });
    const double l2 = trial % 2 ? 1e-3 : 0.0;
    const LossGrad lg = loss_and_gradient(p, X, y, l2);
    const double h = 1e-5;
    for (int j = 0; j <= d; ++j) {
      ModelParams lo = p, hi = p;
      if (j < d) {
        lo.weights[j] -= h;
        hi.weights[j] += h;
      } else {
        lo.bias -= h;
        hi.bias += h;
      }
      const double fd =
          (loss_and_gradient(hi, X, y, l2).loss - loss_and_gradient(lo, X, y, l2).loss) / (2.0 * h);
      const double analytic = j < d ? lg.grad_weights[j] : lg.grad_bias;
      CHECK(std::fabs(analytic - fd) / std::max(1.0, std::fabs(analytic)) < 1e-6);
    }
  }
}

TEST_CASE("l2 adds the expected penalty and gradient term") {
  ModelParams p;
  p.weights = Eigen::VectorXd::Constant(2, 3.0);
  Eigen::MatrixXd X(1, 2);
  X << 0.5, -0.25;
  Eigen::VectorXd y(1);
  y << 0.0;
  const LossGrad plain = loss_and_gradient(p, X, y, 0.0);
  const double l2 = 0.01;
  const LossGrad reg = loss_and_gradient(p, X, y, l2);
  CHECK(reg.loss == doctest::Approx(plain.loss + 0.5 * l2 * p.weights.squaredNorm()).epsilon(1e-12));
  CHECK(reg.grad_weights[0] == doctest::Approx(plain.grad_weights[0] + l2 * p.weights[0]).epsilon(1e-12));
  CHECK(reg.grad_bias == doctest::Approx(plain.grad_bias).epsilon(1e-12));  // bias is not penalized
}

TEST_CASE("predict_proba validates the feature dimension") {
  ModelParams p;
  p.weights = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd X(1, 3);
  X << 1, 2, 3;
  CHECK_THROWS_AS(predict_proba(p, X), ValidationError);
}

TEST_CASE("training reduces loss on separable blobs") {
  const TemporalDataset ds = blobs(100, 2.0, 33);
  std::vector<std::uint32_t> ids(ds.size());
  for (std::uint32_t i = 0; i < ds.size(); ++i) ids[i] = i;
  const XY xy = gather_xy(ds, ids);
  TrainState state;
  state.params.weights = Eigen::VectorXd::Zero(2);
  state.rng_seed = 123;
  HyperParams hp;
  hp.learning_rate = 0.3;
  hp.epochs_per_batch = 20;
  const double before = loss_and_gradient(state.params, xy.X, xy.y, hp.l2).loss;
  const TrainState after = train_epochs(state, xy.X, xy.y, hp);
  const double loss = loss_and_gradient(after.params, xy.X, xy.y, hp.l2).loss;
  CHECK(loss < before * 0.5);
  CHECK(after.batches_seen == 1);
  CHECK(after.rng_seed != state.rng_seed);
}

TEST_CASE("training is deterministic for a fixed state") {
  const TemporalDataset ds = blobs(60, 1.0, 8);
  std::vector<std::uint32_t> ids(ds.size());
  for (std::uint32_t i = 0; i < ds.size(); ++i) ids[i] = i;
  const XY xy = gather_xy(ds, ids);
  TrainState s0;
  s0.params.weights = Eigen::VectorXd::Zero(2);
  s0.rng_seed = 55;
  HyperParams hp;
  const TrainState a = train_epochs(s0, xy.X, xy.y, hp);
  const TrainState b = train_epochs(s0, xy.X, xy.y, hp);
  CHECK(a.params.weights == b.params.weights);
  CHECK(a.params.bias == b.params.bias);
}

TEST_CASE("diverging hyperparameters abort with a clear message") {
  const TemporalDataset ds = blobs(50, 2.0, 13);
  std::vector<std::uint32_t> ids(ds.size());
  for (std::uint32_t i = 0; i < ds.size(); ++i) ids[i] = i;
  const XY xy = gather_xy(ds, ids);
  TrainState state;
  state.params.weights = Eigen::VectorXd::Zero(2);
  state.rng_seed = 1;
  HyperParams hp;
  hp.learning_rate = 1e18;
  hp.epochs_per_batch = 30;
  try {
    train_epochs(state, xy.X, xy.y, hp);
    // extreme rates may still survive two epochs; a pass without divergence is
    // not a failure of the error path itself
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("hyperparameter validation rejects nonsense") {
  const TemporalDataset ds = blobs(50, 1.0, 3);
  std::vector<std::uint32_t> ids(ds.size());
  for (std::uint32_t i = 0; i < ds.size(); ++i) ids[i] = i;
  const XY xy = gather_xy(ds, ids);
  TrainState state;
  state.params.weights = Eigen::VectorXd::Zero(2);
  HyperParams hp;
  hp.learning_rate = -0.1;
  CHECK_THROWS_AS(train_epochs(state, xy.X, xy.y, hp), ValidationError);
  hp = HyperParams{};
  hp.minibatch_size = 0;
  CHECK_THROWS_AS(train_epochs(state, xy.X, xy.y, hp), ValidationError);
  hp = HyperParams{};
  hp.epochs_per_batch = -1;
  CHECK_THROWS_AS(train_epochs(state, xy.X, xy.y, hp), ValidationError);
}

TEST_CASE("train_incremental snapshots one state per batch") {
  const TemporalDataset ds = blobs(120, 1.5, 21);
  const auto batches = batch_by_quarter(ds);
  REQUIRE(batches.size() == 1);
  std::vector<SplitBatch> splits = {split_batch(ds, batches[0], 4, 3)};
  const auto snaps = train_incremental(ds, splits, 1, HyperParams{}, 77);
  REQUIRE(snaps.size() == 1);
  CHECK(snaps[0].weights.size() == 2);
  const auto again = train_incremental(ds, splits, 1, HyperParams{}, 77);
  CHECK(snaps[0].weights == again[0].weights);
  const auto other = train_incremental(ds, splits, 2, HyperParams{}, 77);
  CHECK(snaps[0].weights != other[0].weights);  // different replica, different data
  CHECK_THROWS_AS(train_incremental(ds, splits, 9, HyperParams{}, 77), ValidationError);
}

TEST_CASE("search space validation") {
  HyperSearchSpace space;
  space.lr_min = 0.0;
  CHECK_THROWS_AS(space.validate(), ValidationError);
  space = HyperSearchSpace{};
  space.l2_max = space.l2_min / 10;
  CHECK_THROWS_AS(space.validate(), ValidationError);
  space = HyperSearchSpace{};
  space.minibatch_min = 0;
  CHECK_THROWS_AS(space.validate(), ValidationError);
  space = HyperSearchSpace{};
  space.epochs_max = space.epochs_min - 1;
  CHECK_THROWS_AS(space.validate(), ValidationError);
}

TEST_CASE("tuning samples inside the space and returns the best trial") {
  const TemporalDataset ds = blobs(150, 1.0, 64);
  const auto batches = batch_by_quarter(ds);
  std::vector<SplitBatch> splits;
  for (const auto& b : batches) splits.push_back(split_batch(ds, b, 11, 2));
  HyperSearchSpace space;
  const TuneResult res = tune_hyperparameters(ds, splits, space, 6, 2024);
  REQUIRE(res.trials.size() == 6);
  REQUIRE(res.best_trial >= 0);
  REQUIRE(res.best_trial < 6);
  for (const TuneTrial& t : res.trials) {
    CHECK(t.hyper.learning_rate >= space.lr_min);
    CHECK(t.hyper.learning_rate <= space.lr_max);
    CHECK(t.hyper.l2 >= space.l2_min);
    CHECK(t.hyper.l2 <= space.l2_max);
    CHECK(t.hyper.epochs_per_batch >= space.epochs_min);
    CHECK(t.hyper.epochs_per_batch <= space.epochs_max);
    CHECK(t.hyper.minibatch_size >= space.minibatch_min);
    CHECK(t.hyper.minibatch_size <= space.minibatch_max);
  }
  const TuneTrial& best = res.trials[static_cast<std::size_t>(res.best_trial)];
  CHECK(best.hyper.learning_rate == res.best.learning_rate);
  for (const TuneTrial& t : res.trials) {
    if (t.error.empty()) CHECK(t.validation_auc <= best.validation_auc);
  }
  const TuneResult again = tune_hyperparameters(ds, splits, space, 6, 2024);
  CHECK(again.best_trial == res.best_trial);
  CHECK(again.best.learning_rate == res.best.learning_rate);
}
