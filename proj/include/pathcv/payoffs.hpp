#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "pathcv/errors.hpp"
#include "pathcv/model.hpp"

namespace pathcv {

enum class PayoffKind { asian_floating_strike, asian_fixed_strike, lookback_floating, european_call };

inline std::string_view to_string(PayoffKind kind) noexcept {
  switch (kind) {
    case PayoffKind::asian_floating_strike: return "asian_floating_strike";
    case PayoffKind::asian_fixed_strike: return "asian_fixed_strike";
    case PayoffKind::lookback_floating: return "lookback_floating";
    case PayoffKind::european_call: return "european_call";
  }
  return "unknown";
}

inline std::optional<PayoffKind> parse_payoff_kind(std::string_view name) noexcept {
  for (auto kind : {PayoffKind::asian_floating_strike, PayoffKind::asian_fixed_strike,
                    PayoffKind::lookback_floating, PayoffKind::european_call}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

constexpr bool requires_strike(PayoffKind kind) noexcept {
  return kind == PayoffKind::asian_fixed_strike || kind == PayoffKind::european_call;
}

struct ContractSpec {
  PayoffKind kind = PayoffKind::asian_fixed_strike;
  int days_to_maturity = 30;
  std::optional<double> strike;

  void validate() const {
    if (days_to_maturity < 1) throw ValidationError("contract.days_to_maturity: must be >= 1");
    if (requires_strike(kind)) {
      if (!strike) {
        throw ValidationError("contract.strike: required for " + std::string(to_string(kind)));
      }
      if (!std::isfinite(*strike) || *strike <= 0.0) {
        throw ValidationError("contract.strike: must be finite and > 0");
      }
    } else if (strike) {
      throw ValidationError("contract.strike: not allowed for " + std::string(to_string(kind)));
    }
  }
};

// e^{-r n / N}
inline double discount_factor(const MarketModel& model, int days) noexcept {
  return std::exp(-model.rate * days / model.trading_days_per_year);
}

namespace detail {

inline double average(std::span<const double> prices) noexcept {
  return std::accumulate(prices.begin(), prices.end(), 0.0) / static_cast<double>(prices.size());
}

inline void check_length(const ContractSpec& spec, std::span<const double> prices) {
  if (prices.size() != static_cast<std::size_t>(spec.days_to_maturity)) {
    throw ValidationError("path length " + std::to_string(prices.size()) +
                          " does not match days_to_maturity " +
                          std::to_string(spec.days_to_maturity));
  }
}

inline void check_kind(const ContractSpec& spec, PayoffKind expected) {
  if (spec.kind != expected) {
    throw ValidationError("contract kind " + std::string(to_string(spec.kind)) +
                          " passed to " + std::string(to_string(expected)) + " payoff");
  }
}

inline double require_strike(const ContractSpec& spec) {
  if (!spec.strike) throw ValidationError("contract.strike: missing");
  return *spec.strike;
}

inline double positive_part(double x) noexcept { return x > 0.0 ? x : 0.0; }

// Undiscounted payoffs on the daily closes; unchecked.
inline double raw_asian_floating(std::span<const double> s) noexcept {
  return positive_part(s.back() - average(s));
}
inline double raw_asian_fixed(std::span<const double> s, double strike) noexcept {
  return positive_part(average(s) - strike);
}
inline double raw_lookback(std::span<const double> s) noexcept {
  // The minimum includes S_d(n), so the positive part never binds.
  return positive_part(s.back() - *std::min_element(s.begin(), s.end()));
}
inline double raw_european_call(std::span<const double> s, double strike) noexcept {
  return positive_part(s.back() - strike);
}

}  // namespace detail

// Hot-loop evaluator: validates the contract once, then maps closes to discounted payoffs.
class PayoffEvaluator {
 public:
  PayoffEvaluator(const MarketModel& model, const ContractSpec& spec)
      : kind_(spec.kind), strike_(spec.strike.value_or(0.0)) {
    model.validate();
    spec.validate();
    discount_ = discount_factor(model, spec.days_to_maturity);
  }

  double operator()(std::span<const double> prices) const noexcept {
    switch (kind_) {
      case PayoffKind::asian_floating_strike: return discount_ * detail::raw_asian_floating(prices);
      case PayoffKind::asian_fixed_strike: return discount_ * detail::raw_asian_fixed(prices, strike_);
      case PayoffKind::lookback_floating: return discount_ * detail::raw_lookback(prices);
      case PayoffKind::european_call: return discount_ * detail::raw_european_call(prices, strike_);
    }
    return 0.0;
  }

 private:
  PayoffKind kind_;
  double strike_;
  double discount_ = 1.0;
};

inline double payoff_asian_floating(const MarketModel& model, const ContractSpec& spec,
                                    const PricePath& path) {
  detail::check_kind(spec, PayoffKind::asian_floating_strike);
  detail::check_length(spec, path.prices);
  return discount_factor(model, spec.days_to_maturity) * detail::raw_asian_floating(path.prices);
}

inline double payoff_asian_fixed(const MarketModel& model, const ContractSpec& spec,
                                 const PricePath& path) {
  detail::check_kind(spec, PayoffKind::asian_fixed_strike);
  detail::check_length(spec, path.prices);
  const double strike = detail::require_strike(spec);
  return discount_factor(model, spec.days_to_maturity) *
         detail::raw_asian_fixed(path.prices, strike);
}

inline double payoff_lookback(const MarketModel& model, const ContractSpec& spec,
                              const PricePath& path) {
  detail::check_kind(spec, PayoffKind::lookback_floating);
  detail::check_length(spec, path.prices);
  return discount_factor(model, spec.days_to_maturity) * detail::raw_lookback(path.prices);
}

// Vanilla call on the terminal close. Accepts any contract kind carrying a strike,
// so it can be compared pathwise against the exotic payoffs.
inline double payoff_european_call(const MarketModel& model, const ContractSpec& spec,
                                   const PricePath& path) {
  detail::check_length(spec, path.prices);
  const double strike = detail::require_strike(spec);
  return discount_factor(model, spec.days_to_maturity) *
         detail::raw_european_call(path.prices, strike);
}

inline double discounted_payoff(const MarketModel& model, const ContractSpec& spec,
                                const PricePath& path) {
  switch (spec.kind) {
    case PayoffKind::asian_floating_strike: return payoff_asian_floating(model, spec, path);
    case PayoffKind::asian_fixed_strike: return payoff_asian_fixed(model, spec, path);
    case PayoffKind::lookback_floating: return payoff_lookback(model, spec, path);
    case PayoffKind::european_call: return payoff_european_call(model, spec, path);
  }
  throw ValidationError("unknown payoff kind");
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Closed-form Black-Scholes call with maturity T = n / N years.
inline double black_scholes_call(const MarketModel& model, const ContractSpec& spec) {
  model.validate();
  if (spec.days_to_maturity < 1) throw ValidationError("contract.days_to_maturity: must be >= 1");
  const double strike = detail::require_strike(spec);
  if (!(strike > 0.0)) throw ValidationError("contract.strike: must be > 0");
  if (model.volatility <= 0.0) {
    throw ValidationError("black_scholes_call: volatility must be > 0");
  }
  const double t = static_cast<double>(spec.days_to_maturity) / model.trading_days_per_year;
  const double vol_sqrt_t = model.volatility * std::sqrt(t);
  const double d1 = (std::log(model.initial_price / strike) +
                     (model.rate + 0.5 * model.volatility * model.volatility) * t) /
                    vol_sqrt_t;
  const double d2 = d1 - vol_sqrt_t;
  return model.initial_price * normal_cdf(d1) -
         strike * std::exp(-model.rate * t) * normal_cdf(d2);
}

}  // namespace pathcv
