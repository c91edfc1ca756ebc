#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pathcv/app/scenario.hpp"
#include "pathcv/estimators.hpp"
#include "pathcv/oracle.hpp"

#ifndef PATHCV_VERSION
#define PATHCV_VERSION "0.0.0"
#endif

namespace pathcv::app {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = PATHCV_VERSION;

struct RunReport {
  Scenario scenario;
  EstimatorReport result;
  double wall_seconds = 0.0;
  std::string version{kVersion};
};

inline EstimatorReport estimate(const Scenario& sc) {
  if (sc.estimator == EstimatorKind::plain) {
    return plain_estimate(sc.market, sc.contract, sc.runs, sc.seed, sc.simulation);
  }
  return cv_estimate(sc.market, sc.contract, sc.control(), sc.runs, sc.pilot_fraction, sc.seed,
                     sc.simulation);
}

inline RunReport run_scenario(const Scenario& sc) {
  sc.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report{sc, estimate(sc)};
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline RunReport run_scenario(const std::filesystem::path& path) {
  return run_scenario(load_scenario(path));
}

struct ComparisonRow {
  EstimatorKind estimator;
  EstimatorReport result;
};

// plain, cv-single and cv-multi on the same seed, so main run j follows the
// same path under every estimator.
inline std::vector<ComparisonRow> compare_estimators(Scenario sc) {
  sc.estimator = EstimatorKind::plain;
  sc.custom_weights.clear();
  sc.validate();
  if (!(sc.market.volatility > 0.0)) {
    throw DegenerateControlError("compare needs volatility > 0");
  }
  std::vector<ComparisonRow> rows;
  for (auto kind : {EstimatorKind::plain, EstimatorKind::cv_single, EstimatorKind::cv_multi}) {
    sc.estimator = kind;
    rows.push_back({kind, estimate(sc)});
  }
  return rows;
}

// ---- report emission -------------------------------------------------------

inline Json to_json(const Scenario& sc) {
  Json j;
  j["market"] = {{"initial_price", sc.market.initial_price},
                 {"rate", sc.market.rate},
                 {"volatility", sc.market.volatility},
                 {"trading_days_per_year", sc.market.trading_days_per_year}};
  j["contract"] = {{"kind", to_string(sc.contract.kind)},
                   {"days_to_maturity", sc.contract.days_to_maturity},
                   {"strike", sc.contract.strike ? Json(*sc.contract.strike) : Json(nullptr)}};
  j["runs"] = sc.runs;
  j["seed"] = sc.seed;
  j["estimator"] = to_string(sc.estimator);
  j["pilot_fraction"] = sc.pilot_fraction;
  j["coefficient_source"] = to_string(sc.coefficient_source);
  j["custom_weights"] = sc.custom_weights.empty() ? Json(nullptr) : Json(sc.custom_weights);
  j["exact_control_variance"] = sc.exact_control_variance;
  j["batch_size"] = sc.simulation.batch_size;
  return j;
}

// Same key set for every estimator; inapplicable fields are null.
inline Json to_json(const EstimatorReport& r) {
  const bool has_controls = r.coefficients.has_value();
  Json j;
  j["control_form"] = to_string(r.form);
  j["coefficient_source"] = has_controls ? Json(to_string(r.coefficient_source)) : Json(nullptr);
  j["estimate"] = r.estimate;
  j["standard_error"] = r.standard_error;
  j["runs_used"] = r.runs_used;
  j["pilot_runs"] = r.pilot_runs > 0 ? Json(r.pilot_runs) : Json(nullptr);
  j["empirical_variance_ratio"] = r.empirical_variance_ratio;
  j["predicted_variance_ratio"] = r.predicted_variance_ratio;
  if (has_controls) {
    j["coefficients"] = {{"multipliers", r.coefficients->multipliers},
                         {"control_means", r.coefficients->control_means},
                         {"active", r.coefficients->active}};
    j["per_control_correlations"] = r.per_control_correlations;
  } else {
    j["coefficients"] = nullptr;
    j["per_control_correlations"] = nullptr;
  }
  j["notes"] = r.notes;
  return j;
}

inline Json to_json(const RunReport& r) {
  Json j;
  j["version"] = r.version;
  j["scenario"] = to_json(r.scenario);
  j["result"] = to_json(r.result);
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline Json to_json(const std::vector<ComparisonRow>& rows) {
  Json j = Json::array();
  for (const auto& row : rows) {
    Json item = to_json(row.result);
    item["estimator"] = to_string(row.estimator);
    j.push_back(std::move(item));
  }
  return j;
}

namespace detail {

inline std::string number(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

}  // namespace detail

inline void write_table(std::ostream& os, const RunReport& r) {
  const auto& e = r.result;
  auto line = [&](std::string_view key, const std::string& value) {
    os << std::left << std::setw(28) << key << value << '\n';
  };
  line("version", r.version);
  line("contract", std::string(to_string(r.scenario.contract.kind)));
  line("estimator", std::string(to_string(r.scenario.estimator)));
  line("estimate", detail::number(e.estimate));
  line("standard_error", detail::number(e.standard_error));
  line("runs_used", std::to_string(e.runs_used));
  line("pilot_runs", e.pilot_runs > 0 ? std::to_string(e.pilot_runs) : "-");
  line("empirical_variance_ratio", detail::number(e.empirical_variance_ratio));
  line("predicted_variance_ratio", detail::number(e.predicted_variance_ratio));
  line("wall_seconds", detail::number(r.wall_seconds));
  if (e.coefficients) {
    os << '\n' << std::left << std::setw(10) << "control" << std::setw(26) << "multiplier"
       << std::setw(26) << "corr(Y, control)" << "active\n";
    for (std::size_t i = 0; i < e.coefficients->multipliers.size(); ++i) {
      os << std::left << std::setw(10) << (i + 1) << std::setw(26)
         << detail::number(e.coefficients->multipliers[i]) << std::setw(26)
         << detail::number(e.per_control_correlations[i])
         << (e.coefficients->active[i] ? "yes" : "no") << '\n';
    }
  }
  for (const auto& note : e.notes) os << "note: " << note << '\n';
}

inline void write_table(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << std::left << std::setw(12) << "estimator" << std::setw(24) << "estimate" << std::setw(24)
     << "standard_error" << std::setw(24) << "empirical_ratio" << "predicted_ratio\n";
  for (const auto& row : rows) {
    os << std::left << std::setw(12) << to_string(row.estimator) << std::setw(24)
       << detail::number(row.result.estimate) << std::setw(24)
       << detail::number(row.result.standard_error) << std::setw(24)
       << detail::number(row.result.empirical_variance_ratio)
       << detail::number(row.result.predicted_variance_ratio) << '\n';
  }
}

inline void write_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "estimator,estimate,standard_error,runs_used,empirical_variance_ratio,"
        "predicted_variance_ratio\n";
  for (const auto& row : rows) {
    os << to_string(row.estimator) << ',' << detail::number(row.result.estimate) << ','
       << detail::number(row.result.standard_error) << ',' << row.result.runs_used << ','
       << detail::number(row.result.empirical_variance_ratio) << ','
       << detail::number(row.result.predicted_variance_ratio) << '\n';
  }
}

inline void write_csv(std::ostream& os, const RunReport& r) {
  write_csv(os, std::vector<ComparisonRow>{{r.scenario.estimator, r.result}});
}

inline Json to_json(const oracle::InequalitySummary& s) {
  return {{"trials", s.trials},
          {"passes", s.passes},
          {"max_lhs_minus_rhs", s.max_gap},
          {"first_trial", {{"lhs", s.first.lhs}, {"rhs", s.first.rhs}, {"holds", s.first.holds}}},
          {"equality_witness",
           {{"lhs", s.witness.lhs}, {"rhs", s.witness.rhs}, {"holds", s.witness.holds}}},
          {"all_hold", s.all_hold()}};
}

inline void write_table(std::ostream& os, const oracle::InequalitySummary& s) {
  os << "trials            " << s.trials << '\n'
     << "passes            " << s.passes << '\n'
     << "max(lhs - rhs)    " << detail::number(s.max_gap) << '\n'
     << "first trial       lhs=" << detail::number(s.first.lhs)
     << " rhs=" << detail::number(s.first.rhs) << '\n'
     << "equality witness  lhs=" << detail::number(s.witness.lhs)
     << " rhs=" << detail::number(s.witness.rhs) << '\n'
     << "result            " << (s.all_hold() ? "all trials hold" : "VIOLATION") << '\n';
}

inline Json to_json(const std::vector<SweepRow>& rows) {
  Json j = Json::array();
  for (const auto& row : rows) {
    j.push_back({{"contract", to_string(row.scenario.contract.kind)},
                 {"days_to_maturity", row.scenario.contract.days_to_maturity},
                 {"volatility", row.scenario.model.volatility},
                 {"price_control_r2", row.price_control_r2},
                 {"sum_log_return_corr2", row.sum_log_return_corr2},
                 {"joint_log_return_r2", row.joint_log_return_r2}});
  }
  return j;
}

inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "contract,days_to_maturity,volatility,price_control_r2,sum_log_return_corr2,"
        "joint_log_return_r2\n";
  for (const auto& row : rows) {
    os << to_string(row.scenario.contract.kind) << ',' << row.scenario.contract.days_to_maturity
       << ',' << detail::number(row.scenario.model.volatility) << ','
       << detail::number(row.price_control_r2) << ',' << detail::number(row.sum_log_return_corr2)
       << ',' << detail::number(row.joint_log_return_r2) << '\n';
  }
}

inline void write_table(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << std::left << std::setw(24) << "contract" << std::setw(6) << "n" << std::setw(10) << "sigma"
     << std::setw(24) << "price_control_r2" << std::setw(24) << "sum_corr2_log_returns"
     << "joint_r2_log_returns\n";
  for (const auto& row : rows) {
    os << std::left << std::setw(24) << to_string(row.scenario.contract.kind) << std::setw(6)
       << row.scenario.contract.days_to_maturity << std::setw(10) << row.scenario.model.volatility
       << std::setw(24) << detail::number(row.price_control_r2) << std::setw(24)
       << detail::number(row.sum_log_return_corr2) << detail::number(row.joint_log_return_r2)
       << '\n';
  }
}

}  // namespace pathcv::app
