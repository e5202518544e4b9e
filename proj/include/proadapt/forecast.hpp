#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "proadapt/glm.hpp"

namespace proadapt {

struct ParameterTrajectory {
  int replica_id = 0;
  int param_index = 0;  // 0..D-1 weights, D is the bias
  std::vector<double> times;  // strictly increasing
  std::vector<double> values;
};

// One trajectory per (replica, parameter), replica-major order. All snapshot
// lists must share the same length and parameter dimension.
std::vector<ParameterTrajectory> build_trajectories(const std::vector<std::vector<ModelParams>>& snapshots_per_replica,
                                                    const std::vector<double>& times);

struct SplineSpec {
  int degree = 1;
  int interior_knots = 0;

  int basis_count() const { return degree + 1 + interior_knots; }
};

bool operator==(const SplineSpec& a, const SplineSpec& b);

std::vector<SplineSpec> default_spline_candidates();  // degrees 1..3, 0..1 interior knots

// Clamped uniform knot vector: degree+1 copies of each end, interior knots
// evenly spaced strictly inside [t_min, t_max].
std::vector<double> make_knots(const SplineSpec& spec, double t_min, double t_max);

// All basis values at t. Outside the knot span the terminal span's polynomial
// pieces are extended, so evaluation keeps partition of unity and extrapolates
// smoothly instead of collapsing to zero.
Eigen::VectorXd bspline_basis(int degree, const std::vector<double>& knots, double t);

struct SplineFit {
  SplineSpec spec;
  std::vector<double> knots;
  Eigen::VectorXd coefficients;

  double evaluate(double t) const;
};

// Least squares in the basis via rank-revealing QR, which stays well-posed
// when basis columns collapse.
SplineFit fit_spline(const std::vector<double>& times, const std::vector<double>& values, const SplineSpec& spec);

struct CvSelection {
  SplineSpec spec;
  bool fallback = false;  // no candidate fit the series; persistence is used
  double cv_error = 0.0;  // mean absolute percentage error as a fraction
};

// Forward-chaining one-step-ahead selection: each candidate is refit on every
// prefix long enough to determine it and scored on the next point. Near-zero
// actuals floor the denominator at 1e-8; scores within 1e-9 count as tied, and
// ties prefer fewer basis functions, then lower degree.
CvSelection select_spline_cv(const std::vector<double>& times, const std::vector<double>& values,
                             const std::vector<SplineSpec>& candidates);

struct ParamForecast {
  double value = 0.0;
  bool fallback = false;  // persistence used instead of a spline
  SplineSpec spec;  // degree 0 when fallback
  double cv_error = 0.0;
  double realized_ape = std::numeric_limits<double>::quiet_NaN();  // percent, filled once the target batch is trained
};

struct ForecastResult {
  double target_time = 0.0;
  ModelParams params;
  std::vector<ParamForecast> per_param;  // index D is the bias
};

// Forecasts every parameter of one replica `horizon` ahead of the common time
// grid. A forecast that is non-finite or beyond 10x the largest historical
// magnitude falls back to the last observed value.
ForecastResult forecast_params(const std::vector<ParameterTrajectory>& replica_trajectories, double horizon,
                               const std::vector<SplineSpec>& candidates);

struct MapeResult {
  double mape_percent = 0.0;
  double mae = 0.0;
  int floored = 0;  // actuals with |a| < 1e-8
};

MapeResult mape(const std::vector<double>& actual, const std::vector<double>& forecast);

}  // namespace proadapt
