#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "pathcv/estimators.hpp"

using namespace pathcv;

namespace {

MomentAccumulator from_rows(const std::vector<std::vector<double>>& rows) {
  MomentAccumulator acc(rows.front().size());
  for (const auto& r : rows) acc.add(r);
  return acc;
}

// Centered, mutually orthogonal, equal-norm columns over four samples.
constexpr double kU[4] = {0.5, -0.5, 0.5, -0.5};
constexpr double kW[4] = {0.5, 0.5, -0.5, -0.5};
constexpr double kT[4] = {0.5, -0.5, -0.5, 0.5};

const MarketModel kDesk{100.0, 0.05, 0.2, 252};
const ContractSpec kAsian{PayoffKind::asian_fixed_strike, 30, 100.0};
const ContractSpec kLookback{PayoffKind::lookback_floating, 30, std::nullopt};

ControlSpec control(ControlForm form, CoefficientSource source = CoefficientSource::pilot) {
  ControlSpec c;
  c.form = form;
  c.coefficient_source = source;
  return c;
}

// [Y, X(1..n)] rows for the given contract, one per stream.
std::vector<std::vector<double>> simulate_rows(const MarketModel& model, const ContractSpec& spec,
                                               std::uint64_t runs, std::uint64_t seed) {
  std::vector<std::vector<double>> rows;
  const PayoffEvaluator payoff(model, spec);
  for (std::uint64_t j = 0; j < runs; ++j) {
    const auto path = simulate_path(model, spec.days_to_maturity, {seed, j});
    std::vector<double> row{payoff(path.prices)};
    row.insert(row.end(), path.log_returns.begin(), path.log_returns.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

double sample_variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

}  // namespace

TEST(OptimalC, PerfectControl) {
  const auto acc = from_rows({{1, 1}, {3, 3}, {-2, -2}, {0.5, 0.5}});
  EXPECT_DOUBLE_EQ(optimal_c(acc), -1.0);
}

TEST(OptimalC, UselessControl) {
  const auto acc = from_rows({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  EXPECT_NEAR(optimal_c(acc), 0.0, 1e-15);
}

TEST(OptimalC, TwoPointLaw) {
  // Equiprobable (Y, V) in {(0, 0), (2, 1)}: cov / var(V) = 0.5 / 0.25.
  const auto acc = from_rows({{0, 0}, {2, 1}, {0, 0}, {2, 1}});
  EXPECT_DOUBLE_EQ(optimal_c(acc), -2.0);
}

TEST(OptimalC, DegenerateControl) {
  const auto acc = from_rows({{0, 1}, {2, 1}, {3, 1}});
  EXPECT_THROW(optimal_c(acc), DegenerateControlError);
}

TEST(OptimalBetas, SyntheticTargets) {
  constexpr std::uint64_t runs = 50'000;
  constexpr int n = 5;
  MomentAccumulator self(1 + n), indep(1 + n), linear(1 + n);
  std::vector<double> x(n), row(1 + n);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::uint64_t j = 0; j < runs; ++j) {
    sample_log_returns_into(kDesk, {21, j}, x);
    std::copy(x.begin(), x.end(), row.begin() + 1);
    row[0] = x[0];
    self.add(row);
    row[0] = z(rng);
    indep.add(row);
    row[0] = 2 * x[0] + x[1];
    linear.add(row);
  }
  const double se = 1.0 / std::sqrt(double(runs));
  const auto b_self = optimal_betas(self);
  EXPECT_NEAR(b_self[0], -1.0, 1e-12);
  for (int i = 1; i < n; ++i) EXPECT_NEAR(b_self[i], 0.0, 4 * se);

  // Y has unit-scale noise against X of scale sigma/sqrt(N); betas scale up accordingly.
  const double sd_x = std::sqrt(kDesk.daily_variance());
  const auto b_indep = optimal_betas(indep);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(b_indep[i], 0.0, 4 * se / sd_x);

  const auto b_lin = optimal_betas(linear);
  const double expected[] = {-2, -1, 0, 0, 0};
  // Residual of Y on a single X(i) has variance up to 5 var(X).
  for (int i = 0; i < n; ++i) EXPECT_NEAR(b_lin[i], expected[i], 4 * std::sqrt(5.0) * se);

  const auto b_exact = optimal_betas(linear, kDesk.daily_variance());
  for (int i = 0; i < n; ++i) EXPECT_NEAR(b_exact[i], expected[i], 0.05);
}

TEST(OptimalBetas, ZeroVolatilityIsDegenerate) {
  const MarketModel flat{100.0, 0.05, 0.0, 252};
  MomentAccumulator acc(3);
  std::vector<double> x(2);
  for (std::uint64_t j = 0; j < 10; ++j) {
    sample_log_returns_into(flat, {1, j}, x);
    acc.add(std::vector<double>{double(j), x[0], x[1]});
  }
  EXPECT_THROW(optimal_betas(acc), DegenerateControlError);
  EXPECT_THROW(optimal_betas(acc, 0.0), DegenerateControlError);
}

TEST(PredictedRatio, Arithmetic) {
  std::vector<std::vector<double>> none, single, multi;
  const double resid = std::sqrt(1.0 - 0.36 - 0.25);
  for (int k = 0; k < 4; ++k) {
    none.push_back({kT[k], kU[k], kW[k]});
    single.push_back({0.8 * kU[k] + 0.6 * kW[k], kU[k]});
    multi.push_back({0.6 * kU[k] + 0.5 * kW[k] + resid * kT[k], kU[k], kW[k]});
  }
  EXPECT_NEAR(predicted_ratio(from_rows(none), ControlForm::multi_log_returns), 1.0, 1e-15);
  EXPECT_NEAR(predicted_ratio(from_rows(single), ControlForm::single_terminal_log), 0.36, 1e-14);
  EXPECT_NEAR(predicted_ratio(from_rows(multi), ControlForm::multi_log_returns), 0.39, 1e-14);
  EXPECT_EQ(predicted_ratio(from_rows(single), ControlForm::none), 1.0);
}

TEST(PlainEstimate, DeterministicModelIsExact) {
  const MarketModel flat{100.0, 0.0, 0.0, 252};
  const ContractSpec spec{PayoffKind::asian_fixed_strike, 10, 90.0};
  const auto report = plain_estimate(flat, spec, 1000, 5);
  EXPECT_EQ(report.estimate, 10.0);
  EXPECT_EQ(report.standard_error, 0.0);
  EXPECT_EQ(report.empirical_variance_ratio, 1.0);
  EXPECT_EQ(report.predicted_variance_ratio, 1.0);
  EXPECT_FALSE(report.coefficients.has_value());
}

TEST(PlainEstimate, ShortCallAgreesWithBlackScholes) {
  const ContractSpec spec{PayoffKind::european_call, 21, 100.0};
  const auto report = plain_estimate(kDesk, spec, 100'000, 9);
  EXPECT_NEAR(report.estimate, black_scholes_call(kDesk, spec), 3 * report.standard_error);
}

TEST(PlainEstimate, NeedsTwoRuns) {
  EXPECT_THROW(plain_estimate(kDesk, kAsian, 1, 0), ValidationError);
}

TEST(CvEstimate, NoneIsPlain) {
  const auto plain = plain_estimate(kDesk, kAsian, 5000, 3);
  const auto cv = cv_estimate(kDesk, kAsian, control(ControlForm::none), 5000, 0.1, 3);
  EXPECT_EQ(plain.estimate, cv.estimate);
  EXPECT_EQ(plain.standard_error, cv.standard_error);
  EXPECT_EQ(cv.empirical_variance_ratio, 1.0);
}

TEST(CvEstimate, PilotSplitAndReportShape) {
  const auto r = cv_estimate(kDesk, kAsian, control(ControlForm::multi_log_returns), 10'000, 0.1, 4);
  EXPECT_EQ(r.pilot_runs, 1000u);
  EXPECT_EQ(r.runs_used, 9000u);
  ASSERT_TRUE(r.coefficients.has_value());
  EXPECT_EQ(r.coefficients->multipliers.size(), 30u);
  EXPECT_EQ(r.per_control_correlations.size(), 30u);
  for (double m : r.coefficients->control_means) EXPECT_EQ(m, kDesk.daily_mean());
  for (double rho : r.per_control_correlations) {
    EXPECT_GE(rho, -1.0);
    EXPECT_LE(rho, 1.0);
  }
  EXPECT_LT(r.empirical_variance_ratio, 1.0);
  EXPECT_NEAR(r.empirical_variance_ratio, r.predicted_variance_ratio, 0.05);
}

TEST(CvEstimate, MultiNoWorseThanSingleOnPairedPaths) {
  for (const auto& spec : {kAsian, kLookback}) {
    const auto single = cv_estimate(kDesk, spec, control(ControlForm::single_terminal_log), 20'000, 0.1, 8);
    const auto multi = cv_estimate(kDesk, spec, control(ControlForm::multi_log_returns), 20'000, 0.1, 8);
    EXPECT_LE(multi.empirical_variance_ratio, single.empirical_variance_ratio + 0.02);
    EXPECT_LE(single.empirical_variance_ratio, 1.0 + 0.02);
    EXPECT_NEAR(single.estimate, multi.estimate,
                4 * std::hypot(single.standard_error, multi.standard_error));
  }
}

TEST(CvEstimate, InSampleUsesAllRuns) {
  const auto cs = control(ControlForm::single_terminal_log, CoefficientSource::in_sample);
  const auto r = cv_estimate(kDesk, kAsian, cs, 6000, 0.1, 12);
  EXPECT_EQ(r.runs_used, 6000u);
  EXPECT_EQ(r.pilot_runs, 0u);
  ASSERT_FALSE(r.notes.empty());

  // Reconstruct W on stored samples with the reported c.
  const auto rows = simulate_rows(kDesk, kAsian, 6000, 12);
  const double c = r.coefficients->multipliers[0];
  const double mu = r.coefficients->control_means[0];
  std::vector<double> w;
  for (const auto& row : rows) {
    const double v = std::accumulate(row.begin() + 1, row.end(), 0.0);
    w.push_back(row[0] + c * (v - mu));
  }
  const double mean_w = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
  EXPECT_NEAR(r.estimate, mean_w, 1e-10);
  EXPECT_NEAR(r.standard_error, std::sqrt(sample_variance(w) / w.size()), 1e-10);
  // In-sample, the fitted c attains exactly 1 - corr^2 on the same runs.
  EXPECT_NEAR(r.empirical_variance_ratio, r.predicted_variance_ratio, 1e-9);
}

TEST(CvEstimate, SampleVarianceToggleAgrees) {
  auto exact = control(ControlForm::multi_log_returns);
  auto sampled = exact;
  sampled.exact_control_variance = false;
  const auto a = cv_estimate(kDesk, kAsian, exact, 20'000, 0.1, 6);
  const auto b = cv_estimate(kDesk, kAsian, sampled, 20'000, 0.1, 6);
  EXPECT_NEAR(a.estimate, b.estimate, 2 * a.standard_error);
  EXPECT_NEAR(a.empirical_variance_ratio, b.empirical_variance_ratio, 0.02);
}

TEST(CvEstimate, CustomWeights) {
  const ContractSpec spec{PayoffKind::asian_floating_strike, 5, std::nullopt};
  auto c = control(ControlForm::custom_linear);
  c.weights = {0.2, 0.4, 0.6, 0.8, 1.0};
  const auto r = cv_estimate(kDesk, spec, c, 20'000, 0.1, 2);
  ASSERT_EQ(r.coefficients->multipliers.size(), 1u);
  EXPECT_NEAR(r.coefficients->control_means[0], 3.0 * kDesk.daily_mean(), 1e-15);
  EXPECT_LT(r.empirical_variance_ratio, 1.0);

  c.weights = {1, 2};
  EXPECT_THROW(cv_estimate(kDesk, spec, c, 100, 0.1, 2), ValidationError);
  c.weights = {0, 0, 0, 0, 0};
  EXPECT_THROW(cv_estimate(kDesk, spec, c, 100, 0.1, 2), ValidationError);
  c.weights = {0, 0, std::nan(""), 0, 1};
  EXPECT_THROW(cv_estimate(kDesk, spec, c, 100, 0.1, 2), ValidationError);
}

TEST(CvEstimate, ErrorPaths) {
  const MarketModel flat{100.0, 0.05, 0.0, 252};
  EXPECT_THROW(cv_estimate(flat, kAsian, control(ControlForm::multi_log_returns), 1000, 0.1, 1),
               DegenerateControlError);
  EXPECT_THROW(cv_estimate(flat, kAsian, control(ControlForm::single_terminal_log), 1000, 0.1, 1),
               DegenerateControlError);
  EXPECT_THROW(cv_estimate(kDesk, kAsian, control(ControlForm::multi_log_returns), 3, 0.5, 1),
               ValidationError);
  EXPECT_THROW(cv_estimate(kDesk, kAsian, control(ControlForm::multi_log_returns), 10, 0.1, 1),
               ValidationError);  // one pilot run
  EXPECT_THROW(cv_estimate(kDesk, kAsian, control(ControlForm::multi_log_returns), 10, 0.0, 1),
               ValidationError);
  EXPECT_THROW(cv_estimate(kDesk, kAsian, control(ControlForm::multi_log_returns), 10, 0.9, 1),
               ValidationError);  // one main run
}

TEST(CvEstimate, ThreadCountDoesNotChangeBits) {
  SimulationConfig one{512, 1}, many{512, 4};
  const auto c = control(ControlForm::multi_log_returns);
  const auto a = cv_estimate(kDesk, kLookback, c, 7000, 0.1, 77, one);
  const auto b = cv_estimate(kDesk, kLookback, c, 7000, 0.1, 77, many);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.standard_error, b.standard_error);
  EXPECT_EQ(a.empirical_variance_ratio, b.empirical_variance_ratio);
  EXPECT_EQ(a.coefficients->multipliers, b.coefficients->multipliers);
}

// var(W) is quadratic in c with its vertex at c*, on any fixed sample set.
TEST(CvProperties, OptimalCIsMinimumOnFixedSamples) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rows = simulate_rows(kDesk, kLookback, 2000, seed);
    MomentAccumulator acc(2);
    std::vector<double> y, v;
    for (const auto& row : rows) {
      y.push_back(row[0]);
      v.push_back(std::accumulate(row.begin() + 1, row.end(), 0.0));
      acc.add(std::vector<double>{y.back(), v.back()});
    }
    const double c_star = optimal_c(acc);
    auto var_at = [&](double c) {
      std::vector<double> w(y.size());
      for (std::size_t k = 0; k < y.size(); ++k) w[k] = y[k] + c * v[k];
      return sample_variance(w);
    };
    const double best = var_at(c_star);
    EXPECT_GE(var_at(c_star * 1.1), best);
    EXPECT_GE(var_at(c_star * 0.9), best);
  }
}

// No linear combination of the log-returns beats the joint least-squares optimum
// on the same samples.
TEST(CvProperties, CustomWeightsNeverBeatJointOptimum) {
  const auto acc = from_rows(simulate_rows(kDesk, kAsian, 5000, 31));
  const double floor = min_variance_ratio(acc);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> m(30);
  for (int trial = 0; trial < 500; ++trial) {
    const double c = u(rng) * 50.0;
    for (auto& a : m) a = c * u(rng);
    EXPECT_GE(variance_ratio_at(acc, m), floor - 1e-9);
  }
  // The per-component betas are near the joint optimum because the X(i) are independent.
  const auto betas = optimal_betas(acc, kDesk.daily_variance());
  EXPECT_GE(variance_ratio_at(acc, betas), floor - 1e-9);
  EXPECT_NEAR(variance_ratio_at(acc, betas), floor, 0.02);
}

TEST(CvProperties, VarianceRatioAtMatchesStoredSamples) {
  const auto rows = simulate_rows(kDesk, kAsian, 3000, 40);
  const auto acc = from_rows(rows);
  std::vector<double> m(30);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = -100.0 + 3.0 * i;
  std::vector<double> y, w;
  for (const auto& row : rows) {
    y.push_back(row[0]);
    w.push_back(row[0] + std::inner_product(m.begin(), m.end(), row.begin() + 1, 0.0));
  }
  EXPECT_NEAR(variance_ratio_at(acc, m), sample_variance(w) / sample_variance(y), 1e-9);
}

TEST(SweepDiagnostic, RangesAndDeterminism) {
  const std::vector<SweepScenario> cases{
      {kDesk, kAsian},
      {kDesk, kLookback},
      {kDesk, {PayoffKind::asian_fixed_strike, 1, 100.0}},
      {kDesk, {PayoffKind::european_call, 1, 100.0}},
  };
  const auto rows = sweep_diagnostic(cases, 4000, 5);
  ASSERT_EQ(rows.size(), cases.size());
  for (const auto& row : rows) {
    EXPECT_GE(row.price_control_r2, -1e-9);
    EXPECT_LE(row.price_control_r2, 1.0 + 1e-9);
    EXPECT_GE(row.sum_log_return_corr2, 0.0);
    EXPECT_LE(row.sum_log_return_corr2, 1.05);
    EXPECT_LE(row.joint_log_return_r2, 1.0 + 1e-9);
  }
  const auto again = sweep_diagnostic(cases, 4000, 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].price_control_r2, again[i].price_control_r2);
    EXPECT_EQ(rows[i].sum_log_return_corr2, again[i].sum_log_return_corr2);
  }
  // n = 1 call: both regress on a single variable.
  EXPECT_LE(rows[3].price_control_r2, 1.0);
  EXPECT_LE(rows[3].sum_log_return_corr2, 1.0);
  EXPECT_THROW(sweep_diagnostic(std::vector<SweepScenario>{{{100, 0.05, 0.0, 252}, kAsian}}, 100, 1),
               ValidationError);
}
