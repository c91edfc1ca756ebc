// pathcv: Monte Carlo pricing of Asian and lookback options with log-return
// control variates.
//
//   pathcv price      --scenario FILE [--format json|table|csv] [--output FILE]
//   pathcv compare    --scenario FILE [--format json|table|csv] [--output FILE]
//   pathcv check-ineq [--trials N] [--seed S] [--format json|table]
//   pathcv sweep      --scenario FILE [--scenario FILE ...]
//
// Exit codes: 0 success, 2 validation error, 3 inequality violation, 4 I/O error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pathcv/app/runner.hpp"
#include "pathcv/app/scenario.hpp"
#include "pathcv/errors.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInequality = 3;
constexpr int kExitIo = 4;

struct Options {
  std::vector<std::string> scenarios;
  std::string output;
  std::string format = "table";
  std::optional<std::uint64_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::size_t trials = 1000;
};

pathcv::app::Scenario load(const Options& opt, const std::string& path) {
  auto sc = pathcv::app::load_scenario(path);
  if (opt.runs) sc.runs = *opt.runs;
  if (opt.seed) sc.seed = *opt.seed;
  if (opt.threads) sc.simulation.threads = *opt.threads;
  return sc;
}

void emit(const Options& opt, const std::string& text) {
  if (opt.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(opt.output);
  if (!out || !(out << text)) throw pathcv::IoError("cannot write '" + opt.output + "'");
}

template <class Report>
std::string render(const Options& opt, const Report& report) {
  std::ostringstream os;
  if (opt.format == "table") {
    pathcv::app::write_table(os, report);
  } else if (opt.format == "csv") {
    if constexpr (requires { pathcv::app::write_csv(os, report); }) {
      pathcv::app::write_csv(os, report);
    } else {
      throw pathcv::ValidationError("--format csv is not available for this subcommand");
    }
  } else {
    os << pathcv::app::to_json(report).dump(2) << '\n';
  }
  return os.str();
}

int fail(std::string_view error_class, const std::string& message, int code) {
  std::cerr << "error[" << error_class << "]: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo valuation of path-dependent options with control variates", "pathcv"};
  app.set_version_flag("--version", std::string(pathcv::app::kVersion));
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::string> formats{"json", "json-like", "table", "csv"};
  auto add_common = [&](CLI::App* sub, bool multi_scenario) {
    auto* scenario = sub->add_option("--scenario", opt.scenarios, "Scenario file (YAML)")->required();
    if (!multi_scenario) scenario->expected(1);
    sub->add_option("--output", opt.output, "Write the report to this file instead of stdout");
    sub->add_option("--format", opt.format, "Report format")->check(CLI::IsMember(formats));
    sub->add_option("--runs", opt.runs, "Override the scenario's run count");
    sub->add_option("--seed", opt.seed, "Override the scenario's seed");
    sub->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
  };

  auto* price = app.add_subcommand("price", "Price one scenario");
  add_common(price, false);
  auto* compare = app.add_subcommand("compare", "Compare plain, cv-single and cv-multi on paired paths");
  add_common(compare, false);
  auto* sweep = app.add_subcommand("sweep", "Price-control versus log-return-control correlation table");
  add_common(sweep, true);
  auto* check = app.add_subcommand("check-ineq", "Exact check of the correlation inequality on random finite laws");
  check->add_option("--trials", opt.trials, "Number of randomized trials")->check(CLI::PositiveNumber);
  check->add_option("--seed", opt.seed, "Trial generator seed");
  check->add_option("--output", opt.output, "Write the summary to this file instead of stdout");
  check->add_option("--format", opt.format, "Report format")->check(CLI::IsMember(formats));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*price) {
      emit(opt, render(opt, pathcv::app::run_scenario(load(opt, opt.scenarios.front()))));
    } else if (*compare) {
      emit(opt, render(opt, pathcv::app::compare_estimators(load(opt, opt.scenarios.front()))));
    } else if (*sweep) {
      std::vector<pathcv::SweepScenario> cases;
      pathcv::app::Scenario first;
      for (std::size_t i = 0; i < opt.scenarios.size(); ++i) {
        auto sc = load(opt, opt.scenarios[i]);
        sc.validate();
        if (i == 0) first = sc;
        cases.push_back({sc.market, sc.contract});
      }
      emit(opt, render(opt, pathcv::sweep_diagnostic(cases, first.runs, first.seed, first.simulation)));
    } else if (*check) {
      const auto summary = pathcv::oracle::run_inequality_trials(opt.trials, opt.seed.value_or(0));
      emit(opt, render(opt, summary));
      if (!summary.all_hold()) {
        return fail("inequality_violation",
                    std::to_string(summary.trials - summary.passes) + " trial(s) violate the bound",
                    kExitInequality);
      }
    }
  } catch (const pathcv::DegenerateControlError& e) {
    return fail("degenerate_control", e.what(), kExitValidation);
  } catch (const pathcv::ValidationError& e) {
    return fail("validation", e.what(), kExitValidation);
  } catch (const pathcv::IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
