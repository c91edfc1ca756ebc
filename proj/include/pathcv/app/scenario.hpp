#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pathcv/errors.hpp"
#include "pathcv/estimators.hpp"
#include "pathcv/model.hpp"
#include "pathcv/payoffs.hpp"
#include "pathcv/simulation.hpp"

namespace pathcv::app {

enum class EstimatorKind { plain, cv_single, cv_multi, custom };

inline std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::plain: return "plain";
    case EstimatorKind::cv_single: return "cv-single";
    case EstimatorKind::cv_multi: return "cv-multi";
    case EstimatorKind::custom: return "custom";
  }
  return "unknown";
}

inline ControlForm control_form(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::plain: return ControlForm::none;
    case EstimatorKind::cv_single: return ControlForm::single_terminal_log;
    case EstimatorKind::cv_multi: return ControlForm::multi_log_returns;
    case EstimatorKind::custom: return ControlForm::custom_linear;
  }
  return ControlForm::none;
}

struct Scenario {
  MarketModel market;
  ContractSpec contract;
  std::uint64_t runs = 100000;
  std::uint64_t seed = 1;
  EstimatorKind estimator = EstimatorKind::plain;
  double pilot_fraction = kDefaultPilotFraction;
  CoefficientSource coefficient_source = CoefficientSource::pilot;
  std::vector<double> custom_weights;
  bool exact_control_variance = true;
  SimulationConfig simulation;

  [[nodiscard]] ControlSpec control() const {
    ControlSpec c;
    c.form = control_form(estimator);
    c.coefficient_source = coefficient_source;
    c.weights = custom_weights;
    c.exact_control_variance = exact_control_variance;
    return c;
  }

  // Checks every component before any simulation starts.
  void validate() const {
    market.validate();
    contract.validate();
    control().validate(contract.days_to_maturity);
    const std::uint64_t min_runs = estimator == EstimatorKind::plain ? 2 : 4;
    if (runs < min_runs) {
      throw ValidationError("runs: must be >= " + std::to_string(min_runs) + " for " +
                            std::string(to_string(estimator)));
    }
    if (!(pilot_fraction > 0.0 && pilot_fraction < 1.0)) {
      throw ValidationError("pilot_fraction: must lie in (0, 1)");
    }
    if (simulation.batch_size == 0) throw ValidationError("batch_size: must be >= 1");
    if (estimator != EstimatorKind::plain && !(market.volatility > 0.0)) {
      throw DegenerateControlError("control-variate estimators need volatility > 0");
    }
  }
};

namespace detail {

class FieldReader {
 public:
  // Rejects keys outside `allowed` up front so a typo is reported as such,
  // not as the missing field it was meant to be.
  FieldReader(std::string source, const YAML::Node& map, std::string prefix,
              std::initializer_list<std::string_view> allowed)
      : source_(std::move(source)), map_(map), prefix_(std::move(prefix)) {
    if (!map_.IsMap()) fail(map_, "expected a mapping");
    const std::set<std::string_view> known(allowed);
    for (const auto& kv : map_) {
      const auto key = kv.first.as<std::string>();
      if (!known.contains(key)) fail(kv.first, "unknown field '" + path(key) + "'");
    }
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    const YAML::Node node = map_[key];
    if (!node || node.IsNull()) return std::nullopt;
    try {
      return node.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(node, "field '" + path(key) + "': wrong type");
    }
  }

  template <class T>
  T required(const std::string& key) {
    auto value = optional<T>(key);
    if (!value) fail(map_, "missing required field '" + path(key) + "'");
    return *value;
  }

  YAML::Node node(const std::string& key) {
    const YAML::Node child = map_[key];
    if (!child) fail(map_, "missing required field '" + path(key) + "'");
    return child;
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& message) const {
    std::string where = source_;
    if (at.Mark().line >= 0) where += ":" + std::to_string(at.Mark().line + 1);
    throw ValidationError(where + ": " + message);
  }

  [[noreturn]] void fail_field(const std::string& key, const std::string& message) {
    fail(map_[key] ? map_[key] : map_, "field '" + path(key) + "': " + message);
  }

 private:
  [[nodiscard]] std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  std::string source_;
  YAML::Node map_;
  std::string prefix_;
};

}  // namespace detail

// Scenario documents are YAML mappings; see scenarios/*.yaml for the field set.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError(source + ":" + std::to_string(e.mark.line + 1) + ": parse error: " + e.msg);
  }
  if (!root || root.IsNull()) throw ValidationError(source + ": empty scenario");
  detail::FieldReader top(source, root, "",
                          {"market", "contract", "runs", "seed", "estimator", "pilot_fraction",
                           "coefficient_source", "custom_weights", "exact_control_variance",
                           "batch_size", "threads"});
  Scenario sc;

  {
    detail::FieldReader m(source, top.node("market"), "market",
                          {"initial_price", "rate", "volatility", "trading_days_per_year"});
    sc.market.initial_price = m.required<double>("initial_price");
    sc.market.rate = m.required<double>("rate");
    sc.market.volatility = m.required<double>("volatility");
    sc.market.trading_days_per_year = m.optional<int>("trading_days_per_year").value_or(kDefaultTradingDays);
  }
  {
    detail::FieldReader c(source, top.node("contract"), "contract",
                          {"kind", "days_to_maturity", "strike"});
    const auto kind = c.required<std::string>("kind");
    const auto parsed = parse_payoff_kind(kind);
    if (!parsed) c.fail_field("kind", "unknown payoff kind '" + kind + "'");
    sc.contract.kind = *parsed;
    sc.contract.days_to_maturity = c.required<int>("days_to_maturity");
    sc.contract.strike = c.optional<double>("strike");
  }

  sc.runs = top.required<std::uint64_t>("runs");
  sc.seed = top.required<std::uint64_t>("seed");
  const auto estimator = top.optional<std::string>("estimator").value_or("plain");
  if (estimator == "plain") sc.estimator = EstimatorKind::plain;
  else if (estimator == "cv-single") sc.estimator = EstimatorKind::cv_single;
  else if (estimator == "cv-multi") sc.estimator = EstimatorKind::cv_multi;
  else if (estimator == "custom") sc.estimator = EstimatorKind::custom;
  else top.fail_field("estimator", "expected plain, cv-single, cv-multi or custom");

  sc.pilot_fraction = top.optional<double>("pilot_fraction").value_or(kDefaultPilotFraction);
  const auto source_name = top.optional<std::string>("coefficient_source").value_or("pilot");
  if (source_name == "pilot") sc.coefficient_source = CoefficientSource::pilot;
  else if (source_name == "in_sample") sc.coefficient_source = CoefficientSource::in_sample;
  else top.fail_field("coefficient_source", "expected pilot or in_sample");

  sc.custom_weights = top.optional<std::vector<double>>("custom_weights").value_or(std::vector<double>{});
  sc.exact_control_variance = top.optional<bool>("exact_control_variance").value_or(true);
  sc.simulation.batch_size = top.optional<std::uint64_t>("batch_size").value_or(kDefaultBatchSize);
  sc.simulation.threads = top.optional<unsigned>("threads").value_or(1);
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.string());
}

}  // namespace pathcv::app
