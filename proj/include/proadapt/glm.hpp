#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "proadapt/partition.hpp"

namespace proadapt {

struct ModelParams {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

struct HyperParams {
  double learning_rate = 0.1;
  int epochs_per_batch = 4;
  int minibatch_size = 32;
  double l2 = 1e-4;
};

struct TrainState {
  ModelParams params;
  int batches_seen = 0;
  std::uint64_t rng_seed = 0;
};

double sigmoid(double z);

Eigen::VectorXd predict_proba(const ModelParams& params, const Eigen::MatrixXd& X);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad_weights;
  double grad_bias = 0.0;
};

// Mean cross-entropy plus 0.5 * l2 * |w|^2; probabilities are clamped away
// from 0 and 1 inside the log only, the gradient uses them raw.
LossGrad loss_and_gradient(const ModelParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double l2);

struct XY {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

XY gather_xy(const TemporalDataset& ds, const std::vector<std::uint32_t>& ids);

// Minibatch gradient descent with a deterministic per-epoch shuffle. The
// returned state carries an advanced seed so consecutive batches draw
// different shuffle orders. Non-finite parameters abort with the offending
// hyperparameters in the message.
TrainState train_epochs(TrainState state, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp);

// Warm-start pass over consecutive batch replicas; one parameter snapshot per
// batch. Replica r uses an independent stream derived from seed and r.
std::vector<ModelParams> train_incremental(const TemporalDataset& ds, std::span<const SplitBatch> splits,
                                           int replica_id, const HyperParams& hp, std::uint64_t seed);

struct HyperSearchSpace {
  double lr_min = 0.01, lr_max = 0.5;    // log-uniform
  double l2_min = 1e-6, l2_max = 1e-2;   // log-uniform
  int epochs_min = 2, epochs_max = 8;
  int minibatch_min = 16, minibatch_max = 64;

  void validate() const;
};

struct TuneTrial {
  HyperParams hyper;
  double validation_auc = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // nonempty when the trial diverged
};

struct TuneResult {
  HyperParams best;
  int best_trial = -1;
  std::vector<TuneTrial> trials;
};

// Seeded random search scored by AUC on the last batch's validation split
// after an incremental pass (replica 0) over all given batches. Every trial
// trains from the same seed; ties keep the earliest trial.
TuneResult tune_hyperparameters(const TemporalDataset& ds, std::span<const SplitBatch> splits,
                                const HyperSearchSpace& space, int budget, std::uint64_t seed);

}  // namespace proadapt
