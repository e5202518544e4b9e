#include <doctest.h>

#include <cmath>

#include "proadapt/common.hpp"
#include "proadapt/forecast.hpp"
#include "proadapt/rng.hpp"

using namespace proadapt;

namespace {

std::vector<double> grid(int n, double step = 1.0) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = i * step;
  return t;
}

}  // namespace

TEST_CASE("make_knots clamps ends and spaces interior knots evenly") {
  const auto k = make_knots({2, 1}, 0.0, 4.0);
  CHECK(k == std::vector<double>{0, 0, 0, 2, 4, 4, 4});
  const auto k2 = make_knots({1, 0}, 0.0, 1.0);
  CHECK(k2 == std::vector<double>{0, 0, 1, 1});
  const auto k3 = make_knots({3, 2}, 0.0, 3.0);
  CHECK(k3 == std::vector<double>{0, 0, 0, 0, 1, 2, 3, 3, 3, 3});
}

TEST_CASE("linear basis interpolates hat functions") {
  const auto knots = make_knots({1, 0}, 0.0, 1.0);
  const Eigen::VectorXd mid = bspline_basis(1, knots, 0.5);
  REQUIRE(mid.size() == 2);
  CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid[1] == doctest::Approx(0.5).epsilon(1e-12));
  const Eigen::VectorXd left = bspline_basis(1, knots, 0.0);
  CHECK(left[0] == 1.0);
  CHECK(left[1] == 0.0);
}

TEST_CASE("basis keeps partition of unity inside and outside the domain") {
  for (const SplineSpec spec : {SplineSpec{1, 0}, SplineSpec{2, 1}, SplineSpec{3, 1}}) {
    const auto knots = make_knots(spec, 0.0, 5.0);
    for (const double t : {-2.0, 0.0, 1.3, 2.5, 5.0, 6.0, 8.5}) {
      const Eigen::VectorXd b = bspline_basis(spec.degree, knots, t);
      CHECK(std::fabs(b.sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("degree-d fits reproduce degree-d polynomials") {
  Rng rng(5);
  for (int degree = 1; degree <= 3; ++degree) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> coef(static_cast<std::size_t>(degree) + 1);
      for (double& c : coef) c = 2.0 * rng.uniform01() - 1.0;
      const auto times = grid(12, 0.5);
      std::vector<double> values;
      for (const double t : times) {
        double v = 0.0, p = 1.0;
        for (const double c : coef) {
          v += c * p;
          p *= t;
        }
        values.push_back(v);
      }
      for (int interior = 0; interior <= 1; ++interior) {
        const SplineFit fit = fit_spline(times, values, {degree, interior});
        for (std::size_t i = 0; i < times.size(); ++i) {
          CHECK(std::fabs(fit.evaluate(times[i]) - values[i]) < 1e-8);
        }
      }
    }
  }
}

TEST_CASE("linear series 1,3,5,7 extrapolates to 11 two steps out") {
  const std::vector<double> times = {0, 1, 2, 3};
  const std::vector<double> values = {1, 3, 5, 7};
  const SplineFit fit = fit_spline(times, values, {1, 0});
  CHECK(std::fabs(fit.evaluate(5.0) - 11.0) < 1e-9);
}

TEST_CASE("fit_spline rejects underdetermined series") {
  CHECK_THROWS_AS(fit_spline({0, 1}, {1, 2}, {3, 0}), ValidationError);
  CHECK_THROWS_AS(fit_spline({0}, {1}, {1, 0}), ValidationError);
  CHECK_THROWS_AS(fit_spline({0, 0, 1}, {1, 2, 3}, {1, 0}), ValidationError);  // non-increasing times
}

TEST_CASE("forward CV picks the parsimonious exact model on linear data") {
  Rng rng(31);
  const auto candidates = default_spline_candidates();
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 6 + static_cast<int>(rng.below(7));
    const double slope = 0.1 + 1.9 * rng.uniform01();
    const double intercept = 5.0 + 5.0 * rng.uniform01();
    const double sign = rng.below(2) ? 1.0 : -1.0;
    std::vector<double> times = grid(n), values;
    for (const double t : times) values.push_back(sign * (intercept + slope * t));
    const CvSelection sel = select_spline_cv(times, values, candidates);
    CHECK_FALSE(sel.fallback);
    CHECK(sel.spec.degree == 1);
    CHECK(sel.spec.interior_knots == 0);
  }
}

TEST_CASE("forward CV falls back when no candidate is feasible") {
  const CvSelection sel = select_spline_cv({0, 1, 2}, {1, 2, 3}, default_spline_candidates());
  CHECK(sel.fallback);
  CHECK(sel.spec.degree == 0);
}

TEST_CASE("forward CV prefers the model that predicts unseen points") {
  // quadratic data: the linear candidate misses held-out points, degree 2 nails them
  const auto times = grid(10);
  std::vector<double> values;
  for (const double t : times) values.push_back(3.0 + 0.5 * t + 2.0 * t * t);
  const CvSelection sel = select_spline_cv(times, values, default_spline_candidates());
  CHECK_FALSE(sel.fallback);
  CHECK(sel.spec.degree == 2);
}

TEST_CASE("build_trajectories maps parameters replica-major") {
  std::vector<std::vector<ModelParams>> snaps(2);
  for (int r = 0; r < 2; ++r) {
    for (int b = 0; b < 3; ++b) {
      ModelParams p;
      p.weights = Eigen::VectorXd::Constant(2, 10.0 * r + b);
      p.weights[1] += 0.5;
      p.bias = 100.0 + 10.0 * r + b;
      snaps[static_cast<std::size_t>(r)].push_back(p);
    }
  }
  const auto trajs = build_trajectories(snaps, {0, 1, 2});
  REQUIRE(trajs.size() == 6);  // 2 replicas x (2 weights + bias)
  CHECK(trajs[0].replica_id == 0);
  CHECK(trajs[0].param_index == 0);
  CHECK(trajs[0].values == std::vector<double>{0, 1, 2});
  CHECK(trajs[1].param_index == 1);
  CHECK(trajs[1].values == std::vector<double>{0.5, 1.5, 2.5});
  CHECK(trajs[2].param_index == 2);
  CHECK(trajs[2].values == std::vector<double>{100, 101, 102});
  CHECK(trajs[3].replica_id == 1);
  CHECK(trajs[3].values == std::vector<double>{10, 11, 12});
  CHECK_THROWS_AS(build_trajectories(snaps, {0, 0, 2}), ValidationError);
  CHECK_THROWS_AS(build_trajectories(snaps, {0, 1}), ValidationError);
}

TEST_CASE("forecast_params extends linear parameter paths exactly") {
  std::vector<ParameterTrajectory> trajs;
  trajs.push_back({0, 0, {0, 1, 2, 3, 4, 5}, {1, 3, 5, 7, 9, 11}});
  trajs.push_back({0, 1, {0, 1, 2, 3, 4, 5}, {10, 9, 8, 7, 6, 5}});
  const ForecastResult fr = forecast_params(trajs, 2.0, default_spline_candidates());
  REQUIRE(fr.per_param.size() == 2);
  CHECK(fr.target_time == 7.0);
  CHECK(fr.per_param[0].value == doctest::Approx(15.0).epsilon(1e-9));
  CHECK(fr.per_param[1].value == doctest::Approx(3.0).epsilon(1e-9));
  CHECK_FALSE(fr.per_param[0].fallback);
  CHECK(fr.params.weights[0] == fr.per_param[0].value);
  CHECK(fr.params.bias == fr.per_param[1].value);
}

TEST_CASE("forecast_params validates the trajectory set") {
  std::vector<ParameterTrajectory> dup;
  dup.push_back({0, 0, {0, 1, 2}, {1, 2, 3}});
  dup.push_back({0, 0, {0, 1, 2}, {1, 2, 3}});
  CHECK_THROWS_AS(forecast_params(dup, 1.0, default_spline_candidates()), ValidationError);
  std::vector<ParameterTrajectory> gap;
  gap.push_back({0, 0, {0, 1, 2}, {1, 2, 3}});
  gap.push_back({0, 2, {0, 1, 2}, {1, 2, 3}});
  CHECK_THROWS_AS(forecast_params(gap, 1.0, default_spline_candidates()), ValidationError);
  std::vector<ParameterTrajectory> mixed;
  mixed.push_back({0, 0, {0, 1, 2}, {1, 2, 3}});
  mixed.push_back({0, 1, {0, 1, 3}, {1, 2, 3}});
  CHECK_THROWS_AS(forecast_params(mixed, 1.0, default_spline_candidates()), ValidationError);
}

TEST_CASE("runaway extrapolations fall back to the last value") {
  // short noisy-looking series force high-degree fits to blow up well past 10x history
  std::vector<ParameterTrajectory> trajs;
  trajs.push_back({0, 0, {0, 1, 2, 3, 4, 5, 6}, {1, -1, 1, -1, 1, -1, 100}});
  const ForecastResult fr = forecast_params(trajs, 50.0, {{3, 1}});
  CHECK(fr.per_param[0].fallback);
  CHECK(fr.per_param[0].value == 100.0);
}

TEST_CASE("mape floors near-zero actuals") {
  const MapeResult a = mape({100, 200}, {110, 180});
  CHECK(a.mape_percent == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(a.mae == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(a.floored == 0);
  const MapeResult b = mape({0.0}, {1.0});
  CHECK(b.floored == 1);
  CHECK(b.mae == 1.0);
  CHECK(b.mape_percent == doctest::Approx(1e10));
  CHECK_THROWS_AS(mape({1.0}, {1.0, 2.0}), ValidationError);
}
