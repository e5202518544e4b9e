#include "proadapt/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "proadapt/common.hpp"

namespace proadapt {

std::vector<ParameterTrajectory> build_trajectories(const std::vector<std::vector<ModelParams>>& snapshots_per_replica,
                                                    const std::vector<double>& times) {
  if (snapshots_per_replica.empty()) throw ValidationError("no snapshots to build trajectories from");
  if (times.empty()) throw ValidationError("trajectory time grid is empty");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ValidationError("trajectory times must be strictly increasing");
  }
  const auto dim = snapshots_per_replica.front().front().weights.size();
  std::vector<ParameterTrajectory> out;
  out.reserve(snapshots_per_replica.size() * static_cast<std::size_t>(dim + 1));
  for (std::size_t r = 0; r < snapshots_per_replica.size(); ++r) {
    const auto& snaps = snapshots_per_replica[r];
    if (snaps.size() != times.size()) throw ValidationError("snapshot count does not match the time grid");
    for (const ModelParams& p : snaps) {
      if (p.weights.size() != dim) throw ValidationError("snapshots disagree on parameter dimension");
    }
    for (int j = 0; j <= dim; ++j) {
      ParameterTrajectory traj;
      traj.replica_id = static_cast<int>(r);
      traj.param_index = j;
      traj.times = times;
      traj.values.reserve(snaps.size());
      for (const ModelParams& p : snaps) {
        traj.values.push_back(j < dim ? p.weights[j] : p.bias);
      }
      out.push_back(std::move(traj));
    }
  }
  return out;
}

bool operator==(const SplineSpec& a, const SplineSpec& b) {
  return a.degree == b.degree && a.interior_knots == b.interior_knots;
}

std::vector<SplineSpec> default_spline_candidates() {
  return {{1, 0}, {1, 1}, {2, 0}, {2, 1}, {3, 0}, {3, 1}};
}

std::vector<double> make_knots(const SplineSpec& spec, double t_min, double t_max) {
  if (spec.degree < 1) throw ValidationError("spline degree must be >= 1");
  if (spec.interior_knots < 0) throw ValidationError("interior knot count must be >= 0");
  if (!(t_max > t_min)) throw ValidationError("knot range must have positive width");
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(2 * (spec.degree + 1) + spec.interior_knots));
  knots.insert(knots.end(), static_cast<std::size_t>(spec.degree + 1), t_min);
  for (int j = 1; j <= spec.interior_knots; ++j) {
    knots.push_back(t_min + (t_max - t_min) * j / (spec.interior_knots + 1));
  }
  knots.insert(knots.end(), static_cast<std::size_t>(spec.degree + 1), t_max);
  return knots;
}

Eigen::VectorXd bspline_basis(int degree, const std::vector<double>& knots, double t) {
  if (degree < 1) throw ValidationError("spline degree must be >= 1");
  const int nb = static_cast<int>(knots.size()) - degree - 1;
  if (nb < degree + 1) throw ValidationError("malformed knot vector: too few knots for the degree");
  if (!std::is_sorted(knots.begin(), knots.end())) throw ValidationError("malformed knot vector: knots must be nondecreasing");

  // Span index clamped to [degree, nb-1]: points outside the domain reuse the
  // first or last span, which extends its polynomial pieces.
  int span = degree;
  while (span + 1 <= nb - 1 && t >= knots[static_cast<std::size_t>(span + 1)]) ++span;

  std::vector<double> N(static_cast<std::size_t>(degree) + 1, 0.0);
  std::vector<double> left(N.size(), 0.0), right(N.size(), 0.0);
  N[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[static_cast<std::size_t>(j)] = t - knots[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double den = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      const double temp = den != 0.0 ? N[static_cast<std::size_t>(r)] / den : 0.0;
      N[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    N[static_cast<std::size_t>(j)] = saved;
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(nb);
  for (int r = 0; r <= degree; ++r) out[span - degree + r] = N[static_cast<std::size_t>(r)];
  return out;
}

double SplineFit::evaluate(double t) const {
  return bspline_basis(spec.degree, knots, t).dot(coefficients);
}

SplineFit fit_spline(const std::vector<double>& times, const std::vector<double>& values, const SplineSpec& spec) {
  if (times.size() != values.size()) throw ValidationError("times and values lengths differ");
  if (times.size() < 2) throw ValidationError("spline fit needs at least two points");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ValidationError("times must be strictly increasing");
  }
  SplineFit fit;
  fit.spec = spec;
  fit.knots = make_knots(spec, times.front(), times.back());
  const int nb = spec.basis_count();
  if (static_cast<int>(times.size()) < nb) {
    throw ValidationError("series of length " + std::to_string(times.size()) + " cannot determine " +
                          std::to_string(nb) + " basis coefficients");
  }
  Eigen::MatrixXd B(static_cast<Eigen::Index>(times.size()), nb);
  for (std::size_t i = 0; i < times.size(); ++i) {
    B.row(static_cast<Eigen::Index>(i)) = bspline_basis(spec.degree, fit.knots, times[i]).transpose();
  }
  const Eigen::Map<const Eigen::VectorXd> rhs(values.data(), static_cast<Eigen::Index>(values.size()));
  fit.coefficients = B.colPivHouseholderQr().solve(rhs);
  if (!fit.coefficients.allFinite()) throw std::runtime_error("spline solve produced non-finite coefficients");
  return fit;
}

CvSelection select_spline_cv(const std::vector<double>& times, const std::vector<double>& values,
                             const std::vector<SplineSpec>& candidates) {
  if (candidates.empty()) throw ValidationError("candidate list must not be empty");
  if (times.size() != values.size()) throw ValidationError("times and values lengths differ");
  const int n = static_cast<int>(times.size());

  CvSelection best;
  best.fallback = true;
  best.spec = SplineSpec{0, 0};
  bool have = false;
  for (const SplineSpec& spec : candidates) {
    const int nb = spec.basis_count();
    const int first_cut = nb + 1;  // one spare observation beyond interpolation
    if (first_cut > n - 1) continue;
    double err_sum = 0.0;
    int count = 0;
    for (int k = first_cut; k <= n - 1; ++k) {
      const std::vector<double> tt(times.begin(), times.begin() + k);
      const std::vector<double> vv(values.begin(), values.begin() + k);
      const double pred = fit_spline(tt, vv, spec).evaluate(times[static_cast<std::size_t>(k)]);
      const double actual = values[static_cast<std::size_t>(k)];
      err_sum += std::fabs(pred - actual) / std::max(std::fabs(actual), 1e-8);
      ++count;
    }
    double cv = err_sum / count;
    if (cv < 1e-9) cv = 0.0;  // quantize so exact fits compare as equal
    const bool better = !have || cv < best.cv_error ||
                        (cv == best.cv_error && (nb < best.spec.basis_count() ||
                                                 (nb == best.spec.basis_count() && spec.degree < best.spec.degree)));
    if (better) {
      best.spec = spec;
      best.cv_error = cv;
      best.fallback = false;
      have = true;
    }
  }
  return best;
}

ForecastResult forecast_params(const std::vector<ParameterTrajectory>& replica_trajectories, double horizon,
                               const std::vector<SplineSpec>& candidates) {
  if (replica_trajectories.empty()) throw ValidationError("no trajectories to forecast");
  if (!(horizon > 0.0)) throw ValidationError("forecast horizon must be > 0");

  const auto& times = replica_trajectories.front().times;
  if (times.empty()) throw ValidationError("trajectory time grid is empty");
  const int n_params = static_cast<int>(replica_trajectories.size());
  std::vector<const ParameterTrajectory*> by_index(static_cast<std::size_t>(n_params), nullptr);
  for (const ParameterTrajectory& traj : replica_trajectories) {
    if (traj.times != times) throw ValidationError("trajectories must share a common time grid");
    if (traj.param_index < 0 || traj.param_index >= n_params || by_index[static_cast<std::size_t>(traj.param_index)]) {
      throw ValidationError("trajectories must cover each parameter index exactly once");
    }
    by_index[static_cast<std::size_t>(traj.param_index)] = &traj;
  }

  ForecastResult res;
  res.target_time = times.back() + horizon;
  res.params.weights = Eigen::VectorXd::Zero(n_params - 1);
  res.per_param.reserve(static_cast<std::size_t>(n_params));
  for (const ParameterTrajectory* traj : by_index) {
    ParamForecast pf;
    CvSelection sel = traj->values.size() >= 2
                          ? select_spline_cv(traj->times, traj->values, candidates)
                          : CvSelection{SplineSpec{0, 0}, true, 0.0};
    pf.fallback = sel.fallback;
    pf.spec = sel.spec;
    pf.cv_error = sel.cv_error;
    if (!pf.fallback) {
      const double value = fit_spline(traj->times, traj->values, sel.spec).evaluate(res.target_time);
      double cap = 0.0;
      for (const double v : traj->values) cap = std::max(cap, std::fabs(v));
      cap *= 10.0;
      if (!std::isfinite(value) || std::fabs(value) > cap) {
        pf.fallback = true;
        pf.spec = SplineSpec{0, 0};
      } else {
        pf.value = value;
      }
    }
    if (pf.fallback) pf.value = traj->values.back();
    if (traj->param_index < n_params - 1) {
      res.params.weights[traj->param_index] = pf.value;
    } else {
      res.params.bias = pf.value;
    }
    res.per_param.push_back(pf);
  }
  return res;
}

MapeResult mape(const std::vector<double>& actual, const std::vector<double>& forecast) {
  if (actual.size() != forecast.size()) throw ValidationError("actual and forecast lengths differ");
  if (actual.empty()) throw ValidationError("mape needs at least one value");
  MapeResult res;
  double sum_ape = 0.0, sum_ae = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    double den = std::fabs(actual[i]);
    if (den < 1e-8) {
      den = 1e-8;
      ++res.floored;
    }
    sum_ape += std::fabs(actual[i] - forecast[i]) / den;
    sum_ae += std::fabs(actual[i] - forecast[i]);
  }
  const auto n = static_cast<double>(actual.size());
  res.mape_percent = 100.0 * sum_ape / n;
  res.mae = sum_ae / n;
  return res;
}

}  // namespace proadapt
