#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pathcv/model.hpp"
#include "pathcv/payoffs.hpp"

using namespace pathcv;

namespace {

PricePath path_of(std::vector<double> prices, double s0 = 100.0) {
  PricePath p;
  double prev = s0;
  for (double s : prices) {
    p.log_returns.push_back(std::log(s / prev));
    prev = s;
  }
  p.prices = std::move(prices);
  return p;
}

const MarketModel kZeroRate{100.0, 0.0, 0.2, 252};

ContractSpec contract(PayoffKind kind, int n, std::optional<double> strike = std::nullopt) {
  return ContractSpec{kind, n, strike};
}

}  // namespace

TEST(AsianFloating, Examples) {
  const auto spec = contract(PayoffKind::asian_floating_strike, 2);
  EXPECT_EQ(payoff_asian_floating(kZeroRate, contract(PayoffKind::asian_floating_strike, 3),
                                  path_of({100, 100, 100})),
            0.0);
  EXPECT_DOUBLE_EQ(payoff_asian_floating(kZeroRate, spec, path_of({90, 110})), 10.0);
  EXPECT_EQ(payoff_asian_floating(kZeroRate, spec, path_of({110, 90})), 0.0);
}

TEST(AsianFixed, Examples) {
  EXPECT_DOUBLE_EQ(payoff_asian_fixed(kZeroRate, contract(PayoffKind::asian_fixed_strike, 2, 90.0),
                                      path_of({100, 100})),
                   10.0);
  EXPECT_EQ(payoff_asian_fixed(kZeroRate, contract(PayoffKind::asian_fixed_strike, 2, 110.0),
                               path_of({100, 100})),
            0.0);
  const MarketModel model{100.0, 0.05, 0.2, 252};
  EXPECT_NEAR(payoff_asian_fixed(model, contract(PayoffKind::asian_fixed_strike, 3, 95.0),
                                 path_of({100, 110, 90})),
              4.99702469511906252, 1e-13);
}

TEST(Lookback, Examples) {
  const auto spec = contract(PayoffKind::lookback_floating, 3);
  EXPECT_DOUBLE_EQ(payoff_lookback(kZeroRate, spec, path_of({100, 105, 112})), 12.0);
  EXPECT_EQ(payoff_lookback(kZeroRate, spec, path_of({100, 95, 91})), 0.0);
  EXPECT_EQ(payoff_lookback(kZeroRate, spec, path_of({100, 100, 100})), 0.0);
}

TEST(EuropeanCall, Examples) {
  const auto spec = contract(PayoffKind::european_call, 2, 100.0);
  EXPECT_DOUBLE_EQ(payoff_european_call(kZeroRate, spec, path_of({110, 120})), 20.0);
  EXPECT_EQ(payoff_european_call(kZeroRate, spec, path_of({90, 80})), 0.0);

  const MarketModel model{100.0, 0.05, 0.2, 252};
  std::vector<double> prices(252, 100.0);
  prices.back() = 130.0;
  EXPECT_NEAR(payoff_european_call(model, contract(PayoffKind::european_call, 252, 100.0),
                                   path_of(prices)),
              std::exp(-0.05) * 30.0, 1e-12);
}

TEST(Payoffs, ErrorPaths) {
  const auto two_day = path_of({100, 101});
  EXPECT_THROW(payoff_asian_floating(kZeroRate, contract(PayoffKind::asian_floating_strike, 3), two_day),
               ValidationError);
  EXPECT_THROW(payoff_asian_fixed(kZeroRate, contract(PayoffKind::asian_fixed_strike, 2), two_day),
               ValidationError);
  EXPECT_THROW(payoff_lookback(kZeroRate, contract(PayoffKind::asian_floating_strike, 2), two_day),
               ValidationError);
  EXPECT_THROW(payoff_european_call(kZeroRate, contract(PayoffKind::european_call, 2), two_day),
               ValidationError);
  EXPECT_THROW(contract(PayoffKind::lookback_floating, 2, 100.0).validate(), ValidationError);
  EXPECT_THROW(contract(PayoffKind::asian_fixed_strike, 2, -1.0).validate(), ValidationError);
  EXPECT_THROW(contract(PayoffKind::asian_fixed_strike, 0, 1.0).validate(), ValidationError);
}

TEST(BlackScholes, AtTheMoneyZeroRate) {
  const MarketModel model{100.0, 0.0, 0.2, 252};
  // 100 (2 Phi(0.1) - 1), Phi from a 30-digit evaluation.
  EXPECT_NEAR(black_scholes_call(model, contract(PayoffKind::european_call, 252, 100.0)),
              7.96556745540579673, 1e-11);
}

TEST(BlackScholes, TextbookValue) {
  const MarketModel model{100.0, 0.05, 0.2, 252};
  EXPECT_NEAR(black_scholes_call(model, contract(PayoffKind::european_call, 252, 100.0)),
              10.4505835721855673, 1e-10);
}

TEST(BlackScholes, DeepInTheMoneyLimit) {
  const MarketModel model{100.0, 0.05, 1e-4, 252};
  const double value = black_scholes_call(model, contract(PayoffKind::european_call, 252, 50.0));
  EXPECT_NEAR(value, 100.0 - 50.0 * std::exp(-0.05), 1e-6);
}

TEST(BlackScholes, IncreasingInVolatility) {
  const auto spec = contract(PayoffKind::european_call, 126, 105.0);
  EXPECT_GT(black_scholes_call({100.0, 0.05, 0.3, 252}, spec),
            black_scholes_call({100.0, 0.05, 0.2, 252}, spec));
}

TEST(BlackScholes, RejectsZeroVolatility) {
  EXPECT_THROW(black_scholes_call({100.0, 0.05, 0.0, 252}, contract(PayoffKind::european_call, 10, 100.0)),
               ValidationError);
}

// Pathwise properties over simulated paths.
TEST(Payoffs, PathwiseProperties) {
  const MarketModel model{100.0, 0.03, 0.35, 252};
  const MarketModel undiscounted{100.0, 0.0, 0.35, 252};
  constexpr int n = 12;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto path = simulate_path(model, n, {17, s});
    const double lo = *std::min_element(path.prices.begin(), path.prices.end());
    for (auto kind : {PayoffKind::asian_floating_strike, PayoffKind::lookback_floating}) {
      EXPECT_GE(discounted_payoff(model, contract(kind, n), path), 0.0);
    }
    double prev_asian = std::numeric_limits<double>::infinity();
    double prev_call = std::numeric_limits<double>::infinity();
    for (double k : {60.0, 80.0, 100.0, 120.0, 140.0}) {
      const double asian = payoff_asian_fixed(model, contract(PayoffKind::asian_fixed_strike, n, k), path);
      const double call = payoff_european_call(model, contract(PayoffKind::european_call, n, k), path);
      EXPECT_GE(asian, 0.0);
      EXPECT_GE(call, 0.0);
      EXPECT_LE(asian, prev_asian);
      EXPECT_LE(call, prev_call);
      prev_asian = asian;
      prev_call = call;
    }
    // Lookback equals a call struck at the path minimum.
    EXPECT_DOUBLE_EQ(payoff_lookback(model, contract(PayoffKind::lookback_floating, n), path),
                     payoff_european_call(model, contract(PayoffKind::european_call, n, lo), path));
    // Discount factor e^{-rn/N} separates cleanly from the undiscounted payoff.
    const auto spec = contract(PayoffKind::asian_floating_strike, n);
    EXPECT_NEAR(payoff_asian_floating(model, spec, path),
                std::exp(-0.03 * n / 252) * payoff_asian_floating(undiscounted, spec, path), 1e-12);
  }
}

TEST(PayoffEvaluator, MatchesCheckedPayoffs) {
  const MarketModel model{100.0, 0.05, 0.2, 252};
  const ContractSpec specs[] = {contract(PayoffKind::asian_floating_strike, 7),
                                contract(PayoffKind::asian_fixed_strike, 7, 99.0),
                                contract(PayoffKind::lookback_floating, 7),
                                contract(PayoffKind::european_call, 7, 101.0)};
  for (const auto& spec : specs) {
    const PayoffEvaluator eval(model, spec);
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto path = simulate_path(model, 7, {3, s});
      EXPECT_EQ(eval(path.prices), discounted_payoff(model, spec, path));
    }
  }
}
