#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pathcv/errors.hpp"

namespace pathcv {

inline constexpr int kDefaultTradingDays = 252;

// Risk-neutral geometric Brownian motion monitored at daily closes.
struct MarketModel {
  double initial_price = 100.0;
  double rate = 0.05;
  double volatility = 0.2;
  int trading_days_per_year = kDefaultTradingDays;

  // mu = r - sigma^2 / 2, per year.
  [[nodiscard]] double drift() const noexcept {
    return rate - 0.5 * volatility * volatility;
  }
  [[nodiscard]] double daily_mean() const noexcept {
    return drift() / trading_days_per_year;
  }
  [[nodiscard]] double daily_variance() const noexcept {
    return volatility * volatility / trading_days_per_year;
  }

  void validate() const {
    if (!std::isfinite(initial_price) || !std::isfinite(rate) || !std::isfinite(volatility)) {
      throw ValidationError("market: parameters must be finite");
    }
    if (initial_price <= 0.0) throw ValidationError("market.initial_price: must be > 0");
    if (volatility < 0.0) throw ValidationError("market.volatility: must be >= 0");
    if (trading_days_per_year < 1) {
      throw ValidationError("market.trading_days_per_year: must be >= 1");
    }
  }
};

struct SeedSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
};

// Pilot runs live in their own stream range so that main run j uses the same
// path in every estimator built from the same seed.
inline constexpr std::uint64_t kPilotStreamBase = std::uint64_t{1} << 62;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ keyed by (seed, stream_index). Cheap to construct, so every
// simulation run gets its own engine and runs can be generated in any order.
class StreamEngine {
 public:
  using result_type = std::uint64_t;

  explicit StreamEngine(SeedSpec spec) noexcept {
    std::uint64_t sm = spec.seed;
    const std::uint64_t key = detail::splitmix64(sm);
    sm = key ^ (spec.stream_index * 0xD1B54A32D192ED03ULL);
    detail::splitmix64(sm);
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

// Fills `out` with i.i.d. Normal((r - sigma^2/2)/N, sigma^2/N) daily log-returns.
// Does not validate; callers in hot loops validate the model once.
inline void sample_log_returns_into(const MarketModel& model, SeedSpec seed,
                                    std::span<double> out) {
  StreamEngine engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double mean = model.daily_mean();
  const double sd = std::sqrt(model.daily_variance());
  for (double& x : out) x = mean + sd * normal(engine);
}

inline std::vector<double> sample_log_returns(const MarketModel& model, int n, SeedSpec seed) {
  model.validate();
  if (n < 1) throw ValidationError("days_to_maturity: must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  sample_log_returns_into(model, seed, out);
  return out;
}

// One simulated trajectory: X(i) = ln(S_d(i) / S_d(i-1)) and the daily closes S_d(i).
struct PricePath {
  std::vector<double> log_returns;
  std::vector<double> prices;

  [[nodiscard]] std::size_t days() const noexcept { return prices.size(); }
  [[nodiscard]] double terminal() const noexcept { return prices.back(); }
};

// S_d(i) = S(0) * exp(X(1) + ... + X(i)); the exponent is a running sum so each
// close depends only on the returns up to that day.
inline void build_path_into(double initial_price, std::span<const double> log_returns,
                            std::span<double> prices) noexcept {
  double cumulative = 0.0;
  for (std::size_t i = 0; i < log_returns.size(); ++i) {
    cumulative += log_returns[i];
    prices[i] = initial_price * std::exp(cumulative);
  }
}

inline PricePath build_path(const MarketModel& model, std::span<const double> log_returns) {
  model.validate();
  if (log_returns.empty()) throw ValidationError("log_returns: must be nonempty");
  for (double x : log_returns) {
    if (!std::isfinite(x)) throw ValidationError("log_returns: must be finite");
  }
  PricePath path;
  path.log_returns.assign(log_returns.begin(), log_returns.end());
  path.prices.resize(log_returns.size());
  build_path_into(model.initial_price, path.log_returns, path.prices);
  return path;
}

inline PricePath simulate_path(const MarketModel& model, int n, SeedSpec seed) {
  const auto x = sample_log_returns(model, n, seed);
  return build_path(model, x);
}

}  // namespace pathcv
