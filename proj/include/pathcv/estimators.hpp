#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathcv/errors.hpp"
#include "pathcv/model.hpp"
#include "pathcv/moments.hpp"
#include "pathcv/payoffs.hpp"
#include "pathcv/simulation.hpp"

namespace pathcv {

enum class ControlForm { none, single_terminal_log, multi_log_returns, custom_linear };
enum class CoefficientSource { pilot, in_sample };

inline std::string_view to_string(ControlForm form) noexcept {
  switch (form) {
    case ControlForm::none: return "none";
    case ControlForm::single_terminal_log: return "single_terminal_log";
    case ControlForm::multi_log_returns: return "multi_log_returns";
    case ControlForm::custom_linear: return "custom_linear";
  }
  return "unknown";
}

inline std::string_view to_string(CoefficientSource source) noexcept {
  return source == CoefficientSource::pilot ? "pilot" : "in_sample";
}

inline constexpr double kDefaultPilotFraction = 0.1;

// Controls are built from the daily log-returns X(i):
//   single_terminal_log  V = sum_i X(i) = ln(S_d(n) / S(0))
//   multi_log_returns    one control per X(i)
//   custom_linear        V = sum_i w_i X(i)
struct ControlSpec {
  ControlForm form = ControlForm::none;
  CoefficientSource coefficient_source = CoefficientSource::pilot;
  std::vector<double> weights;
  // Multi-control only: divide by the model variance sigma^2/N instead of the
  // sample variance of X(i) when fitting the betas.
  bool exact_control_variance = true;

  [[nodiscard]] std::size_t control_count(int days) const noexcept {
    switch (form) {
      case ControlForm::none: return 0;
      case ControlForm::multi_log_returns: return static_cast<std::size_t>(days);
      default: return 1;
    }
  }

  void validate(int days) const {
    if (form == ControlForm::custom_linear) {
      if (weights.size() != static_cast<std::size_t>(days)) {
        throw ValidationError("custom_weights: expected " + std::to_string(days) +
                              " weights, got " + std::to_string(weights.size()));
      }
      if (!std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); })) {
        throw ValidationError("custom_weights: must be finite");
      }
      if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
        throw ValidationError("custom_weights: must not all be zero");
      }
    } else if (!weights.empty()) {
      throw ValidationError("custom_weights: only allowed with the custom estimator");
    }
  }
};

struct ControlCoefficients {
  // c for a single control, beta_i per log-return for the multi control.
  std::vector<double> multipliers;
  // Exact model means E[V] or E[X(i)] = (r - sigma^2/2)/N; never sampled.
  std::vector<double> control_means;
  // Controls dropped for vanishing variance carry multiplier 0 and active = false.
  std::vector<bool> active;
};

struct EstimatorReport {
  ControlForm form = ControlForm::none;
  CoefficientSource coefficient_source = CoefficientSource::pilot;
  double estimate = 0.0;
  double standard_error = 0.0;
  std::uint64_t runs_used = 0;
  std::uint64_t pilot_runs = 0;
  double empirical_variance_ratio = 1.0;
  double predicted_variance_ratio = 1.0;
  std::optional<ControlCoefficients> coefficients;
  std::vector<double> per_control_correlations;
  std::vector<std::string> notes;
};

// Exact first two moments of the control variables under the model.
struct ControlMoments {
  std::vector<double> means;
  std::vector<double> variances;
};

inline ControlMoments control_moments(const MarketModel& model, const ControlSpec& control,
                                      int days) {
  const double m = model.daily_mean();
  const double v = model.daily_variance();
  switch (control.form) {
    case ControlForm::none: return {};
    case ControlForm::single_terminal_log: return {{days * m}, {days * v}};
    case ControlForm::multi_log_returns: {
      const auto k = static_cast<std::size_t>(days);
      return {std::vector<double>(k, m), std::vector<double>(k, v)};
    }
    case ControlForm::custom_linear: {
      const auto& w = control.weights;
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      const double sum_sq = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
      return {{sum * m}, {sum_sq * v}};
    }
  }
  return {};
}

// Variances below 1e-14 * max(1, mean^2) are treated as zero.
inline bool is_degenerate_variance(double variance, double mean) noexcept {
  return !(variance > 1e-14 * std::max(1.0, mean * mean));
}

// Layout convention for every estimator accumulator: variable 0 is the payoff Y,
// variables 1..k are the controls.

// c* = -cov(Y, V) / var(V) on a [Y, V] accumulator.
inline double optimal_c(const MomentAccumulator& acc) {
  if (acc.dimension() < 2) throw ValidationError("optimal_c: accumulator needs [Y, V]");
  if (acc.count() < 2) throw ValidationError("optimal_c: need at least 2 samples");
  const double var_v = acc.variance(1);
  if (is_degenerate_variance(var_v, acc.mean(1))) {
    throw DegenerateControlError("control V has zero variance");
  }
  return -acc.covariance(0, 1) / var_v;
}

struct BetaFit {
  std::vector<double> betas;
  std::vector<bool> active;
  std::vector<std::string> warnings;
};

// beta_i* = -cov(Y, X(i)) / var(X(i)) on a [Y, X(1..k)] accumulator, dropping
// controls with vanishing variance. `exact_variance` replaces the sample
// denominators with the model value sigma^2/N.
inline BetaFit fit_betas(const MomentAccumulator& acc, std::optional<double> exact_variance) {
  if (acc.count() < 2) throw ValidationError("optimal_betas: need at least 2 samples");
  const std::size_t k = acc.dimension() - 1;
  BetaFit fit{std::vector<double>(k, 0.0), std::vector<bool>(k, false), {}};
  for (std::size_t i = 0; i < k; ++i) {
    const double var_x = exact_variance ? *exact_variance : acc.variance(i + 1);
    if (is_degenerate_variance(var_x, acc.mean(i + 1))) {
      fit.warnings.push_back("control X(" + std::to_string(i + 1) +
                             ") dropped: variance below degeneracy threshold");
      continue;
    }
    fit.betas[i] = -acc.covariance(0, i + 1) / var_x;
    fit.active[i] = true;
  }
  if (std::none_of(fit.active.begin(), fit.active.end(), [](bool a) { return a; })) {
    throw DegenerateControlError("every log-return control has zero variance");
  }
  return fit;
}

// Strict form: every control must be usable.
inline std::vector<double> optimal_betas(const MomentAccumulator& acc,
                                         std::optional<double> exact_variance = std::nullopt) {
  auto fit = fit_betas(acc, exact_variance);
  if (!fit.warnings.empty()) throw DegenerateControlError(fit.warnings.front());
  return std::move(fit.betas);
}

// Predicted var(W)/var(Y): 1 - corr^2(Y, V) for one control, 1 - sum_i corr^2(Y, X(i))
// for the multi control. Inactive controls are skipped when `active` is given.
inline double predicted_ratio(const MomentAccumulator& acc, ControlForm form,
                              const std::vector<bool>* active = nullptr) {
  if (acc.count() < 2) throw ValidationError("predicted_ratio: need at least 2 samples");
  if (form == ControlForm::none) return 1.0;
  const std::size_t k = form == ControlForm::multi_log_returns ? acc.dimension() - 1 : 1;
  double ratio = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (active && !(*active)[i]) continue;
    const double rho = acc.correlation(0, i + 1);
    ratio -= rho * rho;
  }
  return ratio;
}

// Sample var(Y + sum_i m_i C_i) / var(Y) evaluated from the accumulated moments.
inline double variance_ratio_at(const MomentAccumulator& acc, std::span<const double> multipliers) {
  const std::size_t k = acc.dimension() - 1;
  if (multipliers.size() != k) throw ValidationError("variance_ratio_at: multiplier count");
  const double var_y = acc.variance(0);
  double var_w = var_y;
  for (std::size_t i = 0; i < k; ++i) {
    var_w += 2.0 * multipliers[i] * acc.covariance(0, i + 1);
    for (std::size_t j = 0; j < k; ++j) {
      var_w += multipliers[i] * multipliers[j] * acc.covariance(i + 1, j + 1);
    }
  }
  return var_w / var_y;
}

// Smallest sample var(W)/var(Y) over all linear combinations of the listed
// regressors: 1 - s_yx^T S_xx^{-1} s_yx / var(Y), i.e. 1 - R^2 of the least-squares fit.
inline double min_variance_ratio(const MomentAccumulator& acc, std::size_t y_index,
                                 std::span<const std::size_t> regressors) {
  const auto k = static_cast<Eigen::Index>(regressors.size());
  Eigen::MatrixXd sxx(k, k);
  Eigen::VectorXd sxy(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    sxy(i) = acc.covariance(y_index, regressors[i]);
    for (Eigen::Index j = 0; j < k; ++j) sxx(i, j) = acc.covariance(regressors[i], regressors[j]);
  }
  const double var_y = acc.variance(y_index);
  if (!(var_y > 0.0)) throw DegenerateControlError("payoff has zero sample variance");
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(sxx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DegenerateControlError("regressor covariance is not positive definite");
  }
  const Eigen::VectorXd coef = ldlt.solve(sxy);
  return 1.0 - sxy.dot(coef) / var_y;
}

// Joint optimum over all controls of a [Y, C(1..k)] accumulator.
inline double min_variance_ratio(const MomentAccumulator& acc) {
  std::vector<std::size_t> idx(acc.dimension() - 1);
  std::iota(idx.begin(), idx.end(), std::size_t{1});
  return min_variance_ratio(acc, 0, idx);
}

namespace detail {

// Per-thread scratch that turns a stream index into (Y, controls...).
class PathSampler {
 public:
  PathSampler(const MarketModel& model, const ContractSpec& spec, const ControlSpec& control,
              std::uint64_t seed)
      : model_(model), payoff_(model, spec), control_(&control), seed_(seed),
        log_returns_(static_cast<std::size_t>(spec.days_to_maturity)),
        prices_(log_returns_.size()), row_(1 + control.control_count(spec.days_to_maturity)) {}

  // Returns [Y, controls...] for one run.
  std::span<const double> sample(std::uint64_t stream_index) {
    sample_log_returns_into(model_, {seed_, stream_index}, log_returns_);
    build_path_into(model_.initial_price, log_returns_, prices_);
    row_[0] = payoff_(prices_);
    switch (control_->form) {
      case ControlForm::none: break;
      case ControlForm::single_terminal_log:
        row_[1] = std::accumulate(log_returns_.begin(), log_returns_.end(), 0.0);
        break;
      case ControlForm::multi_log_returns:
        std::copy(log_returns_.begin(), log_returns_.end(), row_.begin() + 1);
        break;
      case ControlForm::custom_linear:
        row_[1] = std::inner_product(log_returns_.begin(), log_returns_.end(),
                                     control_->weights.begin(), 0.0);
        break;
    }
    return row_;
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return row_.size(); }

 private:
  MarketModel model_;
  PayoffEvaluator payoff_;
  const ControlSpec* control_;
  std::uint64_t seed_;
  std::vector<double> log_returns_;
  std::vector<double> prices_;
  std::vector<double> row_;
};

struct MainBatch {
  MomentAccumulator moments;  // [Y, controls...]
  MomentAccumulator w;        // [W]
  void merge(const MainBatch& other) {
    moments.merge(other.moments);
    w.merge(other.w);
  }
};

inline MomentAccumulator accumulate_runs(const MarketModel& model, const ContractSpec& spec,
                                         const ControlSpec& control, std::uint64_t seed,
                                         std::uint64_t stream_base, std::uint64_t runs,
                                         const SimulationConfig& config) {
  return accumulate_batches(runs, config, [&](std::uint64_t first, std::uint64_t last) {
    PathSampler sampler(model, spec, control, seed);
    MomentAccumulator acc(sampler.dimension());
    for (std::uint64_t j = first; j < last; ++j) acc.add(sampler.sample(stream_base + j));
    return acc;
  });
}

inline ControlCoefficients fit_coefficients(const MomentAccumulator& acc, const ControlSpec& control,
                                            const ControlMoments& exact,
                                            std::vector<std::string>& notes) {
  ControlCoefficients coefficients;
  coefficients.control_means = exact.means;
  if (control.form == ControlForm::multi_log_returns) {
    auto fit = fit_betas(acc, control.exact_control_variance
                                  ? std::optional<double>(exact.variances.front())
                                  : std::nullopt);
    coefficients.multipliers = std::move(fit.betas);
    coefficients.active = std::move(fit.active);
    notes.insert(notes.end(), fit.warnings.begin(), fit.warnings.end());
  } else {
    coefficients.multipliers = {optimal_c(acc)};
    coefficients.active = {true};
  }
  return coefficients;
}

// Fills ratios and correlations from the accumulator the estimate was built on.
inline void fill_diagnostics(EstimatorReport& report, const MomentAccumulator& acc, double var_w) {
  const double var_y = acc.variance(0);
  const auto& active = report.coefficients->active;
  const std::size_t k = acc.dimension() - 1;
  report.per_control_correlations.assign(k, 0.0);
  if (!(var_y > 0.0)) {
    report.empirical_variance_ratio = 1.0;
    report.predicted_variance_ratio = 1.0;
    report.notes.emplace_back("payoff has zero sample variance; variance ratios set to 1");
    return;
  }
  report.empirical_variance_ratio = var_w / var_y;
  for (std::size_t i = 0; i < k; ++i) {
    if (active[i]) report.per_control_correlations[i] = acc.correlation(0, i + 1);
  }
  report.predicted_variance_ratio = predicted_ratio(acc, report.form, &active);
  if (report.predicted_variance_ratio < -0.05 || report.predicted_variance_ratio > 1.05) {
    report.notes.emplace_back("predicted variance ratio outside [-0.05, 1.05]");
  }
}

}  // namespace detail

// Plain Monte Carlo: the mean of R discounted payoffs on streams 0..R-1.
inline EstimatorReport plain_estimate(const MarketModel& model, const ContractSpec& spec,
                                      std::uint64_t runs, std::uint64_t seed,
                                      const SimulationConfig& config = {}) {
  model.validate();
  spec.validate();
  if (runs < 2) throw ValidationError("runs: plain estimator needs at least 2 runs");
  const ControlSpec none{};
  const auto acc = detail::accumulate_runs(model, spec, none, seed, 0, runs, config);
  EstimatorReport report;
  report.estimate = acc.mean(0);
  report.standard_error = std::sqrt(acc.variance(0) / static_cast<double>(runs));
  report.runs_used = runs;
  return report;
}

// Control-variate estimator W = Y + sum_i m_i (C_i - E[C_i]).
//
// Pilot mode fits the multipliers on ceil(pilot_fraction * R) runs drawn from
// the pilot stream range and evaluates W on the remaining runs (streams
// 0..R-P-1), so the multipliers are independent of the averaged samples.
// In-sample mode fits and averages on the same R runs.
inline EstimatorReport cv_estimate(const MarketModel& model, const ContractSpec& spec,
                                   const ControlSpec& control, std::uint64_t runs,
                                   double pilot_fraction, std::uint64_t seed,
                                   const SimulationConfig& config = {}) {
  model.validate();
  spec.validate();
  control.validate(spec.days_to_maturity);
  if (control.form == ControlForm::none) return plain_estimate(model, spec, runs, seed, config);
  if (runs < 4) throw ValidationError("runs: control-variate estimator needs at least 4 runs");

  const auto exact = control_moments(model, control, spec.days_to_maturity);
  if (control.form != ControlForm::multi_log_returns &&
      is_degenerate_variance(exact.variances.front(), exact.means.front())) {
    throw DegenerateControlError("control V has zero variance under the model");
  }

  EstimatorReport report;
  report.form = control.form;
  report.coefficient_source = control.coefficient_source;

  if (control.coefficient_source == CoefficientSource::in_sample) {
    const auto acc = detail::accumulate_runs(model, spec, control, seed, 0, runs, config);
    report.coefficients = detail::fit_coefficients(acc, control, exact, report.notes);
    const auto& m = report.coefficients->multipliers;
    double estimate = acc.mean(0);
    for (std::size_t i = 0; i < m.size(); ++i) estimate += m[i] * (acc.mean(i + 1) - exact.means[i]);
    const double var_w = acc.variance(0) > 0.0 ? variance_ratio_at(acc, m) * acc.variance(0) : 0.0;
    report.estimate = estimate;
    report.standard_error = std::sqrt(std::max(var_w, 0.0) / static_cast<double>(runs));
    report.runs_used = runs;
    report.notes.emplace_back(
        "in-sample coefficients: estimate carries an O(1/R) bias from fitting on the averaged runs");
    detail::fill_diagnostics(report, acc, var_w);
    return report;
  }

  if (!(pilot_fraction > 0.0 && pilot_fraction < 1.0)) {
    throw ValidationError("pilot_fraction: must lie in (0, 1)");
  }
  const auto pilot_runs =
      static_cast<std::uint64_t>(std::ceil(pilot_fraction * static_cast<double>(runs)));
  if (pilot_runs < 2 || pilot_runs + 2 > runs) {
    throw ValidationError("pilot_fraction: pilot and main phases each need at least 2 runs");
  }
  const std::uint64_t main_runs = runs - pilot_runs;

  const auto pilot =
      detail::accumulate_runs(model, spec, control, seed, kPilotStreamBase, pilot_runs, config);
  report.coefficients = detail::fit_coefficients(pilot, control, exact, report.notes);
  const ControlCoefficients& coef = *report.coefficients;

  const auto main = accumulate_batches(main_runs, config, [&](std::uint64_t first, std::uint64_t last) {
    detail::PathSampler sampler(model, spec, control, seed);
    detail::MainBatch batch{MomentAccumulator(sampler.dimension()), MomentAccumulator(1)};
    for (std::uint64_t j = first; j < last; ++j) {
      const auto row = sampler.sample(j);
      double w = row[0];
      for (std::size_t i = 0; i < coef.multipliers.size(); ++i) {
        w += coef.multipliers[i] * (row[i + 1] - coef.control_means[i]);
      }
      batch.moments.add(row);
      batch.w.add(std::span<const double>(&w, 1));
    }
    return batch;
  });

  const double var_w = main.w.variance(0);
  report.estimate = main.w.mean(0);
  report.standard_error = std::sqrt(var_w / static_cast<double>(main_runs));
  report.runs_used = main_runs;
  report.pilot_runs = pilot_runs;
  detail::fill_diagnostics(report, main.moments, var_w);
  return report;
}

// corr^2(Y, sum_i beta_i S_d(i)) under least-squares beta, set beside the
// log-return quantities, for one market/contract pair. Descriptive only.
struct SweepScenario {
  MarketModel model;
  ContractSpec contract;
};

struct SweepRow {
  SweepScenario scenario;
  double price_control_r2 = 0.0;      // best corr^2(Y, sum_i beta_i S_d(i))
  double sum_log_return_corr2 = 0.0;  // sum_i corr^2(Y, X(i))
  double joint_log_return_r2 = 0.0;   // best corr^2(Y, sum_i alpha_i X(i))
};

inline std::vector<SweepRow> sweep_diagnostic(std::span<const SweepScenario> scenarios,
                                              std::uint64_t runs, std::uint64_t seed,
                                              const SimulationConfig& config = {}) {
  if (runs < 4) throw ValidationError("runs: sweep needs at least 4 runs");
  std::vector<SweepRow> rows;
  rows.reserve(scenarios.size());
  for (const auto& sc : scenarios) {
    sc.model.validate();
    sc.contract.validate();
    if (!(sc.model.volatility > 0.0)) throw ValidationError("sweep: volatility must be > 0");
    const auto n = static_cast<std::size_t>(sc.contract.days_to_maturity);
    const auto acc = accumulate_batches(runs, config, [&](std::uint64_t first, std::uint64_t last) {
      const PayoffEvaluator payoff(sc.model, sc.contract);
      std::vector<double> row(1 + 2 * n);
      std::span<double> x(row.data() + 1, n);
      std::span<double> s(row.data() + 1 + n, n);
      MomentAccumulator batch(row.size());
      for (std::uint64_t j = first; j < last; ++j) {
        sample_log_returns_into(sc.model, {seed, j}, x);
        build_path_into(sc.model.initial_price, x, s);
        row[0] = payoff(s);
        batch.add(row);
      }
      return batch;
    });
    std::vector<std::size_t> x_idx(n), s_idx(n);
    std::iota(x_idx.begin(), x_idx.end(), std::size_t{1});
    std::iota(s_idx.begin(), s_idx.end(), n + 1);
    SweepRow out{sc};
    out.price_control_r2 = 1.0 - min_variance_ratio(acc, 0, s_idx);
    out.joint_log_return_r2 = 1.0 - min_variance_ratio(acc, 0, x_idx);
    for (std::size_t i : x_idx) {
      const double rho = acc.correlation(0, i);
      out.sum_log_return_corr2 += rho * rho;
    }
    rows.push_back(out);
  }
  return rows;
}

}  // namespace pathcv
