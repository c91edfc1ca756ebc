#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathcv/errors.hpp"

// Exact arithmetic on finite discrete joint laws. Everything here is computed
// by weighted enumeration over atoms, with no sampling.
namespace pathcv::oracle {

inline constexpr double kExactTolerance = 1e-12;

struct Atom {
  std::vector<double> values;
  double probability = 0.0;
};

class FiniteJointDistribution {
 public:
  FiniteJointDistribution(std::vector<std::string> names, std::vector<Atom> atoms)
      : names_(std::move(names)), atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw ValidationError("distribution: needs at least one atom");
    double total = 0.0;
    for (const auto& atom : atoms_) {
      if (atom.values.size() != names_.size()) {
        throw ValidationError("distribution: atom width does not match variable count");
      }
      if (!(atom.probability >= 0.0) || !std::isfinite(atom.probability)) {
        throw ValidationError("distribution: probabilities must be finite and nonnegative");
      }
      total += atom.probability;
    }
    if (std::abs(total - 1.0) > kExactTolerance) {
      throw ValidationError("distribution: probabilities sum to " + std::to_string(total));
    }
  }

  [[nodiscard]] std::size_t variable_count() const noexcept { return names_.size(); }
  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
  [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }

  [[nodiscard]] std::size_t index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ValidationError("distribution: no variable named " + name);
    return static_cast<std::size_t>(it - names_.begin());
  }

  // Appends a variable defined pointwise on the atoms.
  [[nodiscard]] FiniteJointDistribution with_variable(
      std::string name, const std::function<double(std::span<const double>)>& fn) const {
    auto names = names_;
    names.push_back(std::move(name));
    auto atoms = atoms_;
    for (auto& atom : atoms) atom.values.push_back(fn(atom.values));
    return {std::move(names), std::move(atoms)};
  }

 private:
  std::vector<std::string> names_;
  std::vector<Atom> atoms_;
};

struct ExactMoments {
  std::vector<double> means;
  Eigen::MatrixXd covariance;

  [[nodiscard]] double variance(std::size_t i) const { return covariance(i, i); }

  [[nodiscard]] double correlation(std::size_t i, std::size_t j) const {
    const double vi = variance(i);
    const double vj = variance(j);
    if (!(vi > 0.0) || !(vj > 0.0)) {
      throw DegenerateControlError("correlation requested for a zero-variance variable");
    }
    return covariance(i, j) / std::sqrt(vi * vj);
  }
};

// Population moments (probability-weighted, no n-1 correction).
inline ExactMoments exact_moments(const FiniteJointDistribution& d) {
  const auto m = d.variable_count();
  ExactMoments out{std::vector<double>(m, 0.0),
                   Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))};
  for (const auto& atom : d.atoms()) {
    for (std::size_t i = 0; i < m; ++i) out.means[i] += atom.probability * atom.values[i];
  }
  std::vector<double> centered(m);
  for (const auto& atom : d.atoms()) {
    for (std::size_t i = 0; i < m; ++i) centered[i] = atom.values[i] - out.means[i];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        out.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            atom.probability * centered[i] * centered[j];
      }
    }
  }
  out.covariance.triangularView<Eigen::StrictlyLower>() = out.covariance.transpose();
  return out;
}

struct Marginal {
  std::vector<double> values;
  std::vector<double> probabilities;
};

// The joint law of mutually independent discrete variables X1..Xn, built as a
// product of marginals. Holding one of these is the declaration of independence
// that the correlation inequality requires.
class IndependentFamily {
 public:
  explicit IndependentFamily(std::vector<Marginal> marginals)
      : marginals_(std::move(marginals)), joint_(build(marginals_)) {}

  [[nodiscard]] std::size_t size() const noexcept { return marginals_.size(); }
  [[nodiscard]] const std::vector<Marginal>& marginals() const noexcept { return marginals_; }
  // Atoms enumerate the product space with the last variable varying fastest.
  [[nodiscard]] const FiniteJointDistribution& joint() const noexcept { return joint_; }

 private:
  static FiniteJointDistribution build(const std::vector<Marginal>& marginals) {
    if (marginals.empty()) throw ValidationError("independent family: needs a variable");
    std::vector<std::string> names;
    std::vector<Atom> atoms{Atom{{}, 1.0}};
    for (std::size_t v = 0; v < marginals.size(); ++v) {
      const auto& mg = marginals[v];
      if (mg.values.empty() || mg.values.size() != mg.probabilities.size()) {
        throw ValidationError("marginal: values and probabilities must be nonempty and aligned");
      }
      names.push_back("X" + std::to_string(v + 1));
      std::vector<Atom> next;
      next.reserve(atoms.size() * mg.values.size());
      for (const auto& atom : atoms) {
        for (std::size_t k = 0; k < mg.values.size(); ++k) {
          Atom a = atom;
          a.values.push_back(mg.values[k]);
          a.probability *= mg.probabilities[k];
          next.push_back(std::move(a));
        }
      }
      atoms = std::move(next);
    }
    return {std::move(names), std::move(atoms)};
  }

  std::vector<Marginal> marginals_;
  FiniteJointDistribution joint_;
};

struct CorrelationBound {
  double lhs = 0.0;  // corr^2(Y, sum_i alpha_i X_i)
  double rhs = 0.0;  // sum_i corr^2(Y, X_i)
  bool holds = false;
};

// Evaluates both sides of corr^2(Y, sum alpha_i X_i) <= sum corr^2(Y, X_i) on an
// arbitrary joint law. Nothing here assumes the X_i are independent; with
// dependent X_i the bound can fail and `holds` reports that.
inline CorrelationBound correlation_bound(const FiniteJointDistribution& d, std::size_t y,
                                          std::span<const std::size_t> xs,
                                          std::span<const double> alpha) {
  if (xs.size() != alpha.size()) throw ValidationError("correlation_bound: weight count");
  const auto with_v = d.with_variable("V", [&](std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += alpha[i] * v[xs[i]];
    return s;
  });
  const auto mom = exact_moments(with_v);
  const std::size_t v_index = with_v.variable_count() - 1;
  if (!(mom.variance(v_index) > 0.0)) {
    throw DegenerateControlError("sum of alpha_i X_i has zero variance");
  }
  CorrelationBound out;
  const double r = mom.correlation(y, v_index);
  out.lhs = r * r;
  for (std::size_t x : xs) {
    const double rx = mom.correlation(y, x);
    out.rhs += rx * rx;
  }
  out.holds = out.lhs <= out.rhs + kExactTolerance;
  return out;
}

// Y is given as one value per atom of the family's product law.
inline CorrelationBound check_correlation_inequality(const IndependentFamily& family,
                                                     std::span<const double> y_table,
                                                     std::span<const double> alpha) {
  const auto& atoms = family.joint().atoms();
  if (y_table.size() != atoms.size()) {
    throw ValidationError("Y table must have one entry per product atom");
  }
  std::vector<Atom> with_y;
  with_y.reserve(atoms.size());
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    Atom atom{{y_table[a]}, atoms[a].probability};
    atom.values.insert(atom.values.end(), atoms[a].values.begin(), atoms[a].values.end());
    with_y.push_back(std::move(atom));
  }
  std::vector<std::string> names{"Y"};
  names.insert(names.end(), family.joint().names().begin(), family.joint().names().end());
  const FiniteJointDistribution d(std::move(names), std::move(with_y));
  std::vector<std::size_t> xs(family.size());
  std::iota(xs.begin(), xs.end(), std::size_t{1});
  return correlation_bound(d, 0, xs, alpha);
}

inline CorrelationBound check_correlation_inequality(
    const IndependentFamily& family, const std::function<double(std::span<const double>)>& y,
    std::span<const double> alpha) {
  std::vector<double> table;
  for (const auto& atom : family.joint().atoms()) table.push_back(y(atom.values));
  return check_correlation_inequality(family, table, alpha);
}

// var(Y + c (V - E V)) by enumeration.
inline double brute_force_cv_variance(const FiniteJointDistribution& d, std::size_t y,
                                      std::size_t v, double c) {
  double mean_v = 0.0;
  for (const auto& atom : d.atoms()) mean_v += atom.probability * atom.values[v];
  double mean_w = 0.0;
  for (const auto& atom : d.atoms()) {
    mean_w += atom.probability * (atom.values[y] + c * (atom.values[v] - mean_v));
  }
  double var_w = 0.0;
  for (const auto& atom : d.atoms()) {
    const double dev = atom.values[y] + c * (atom.values[v] - mean_v) - mean_w;
    var_w += atom.probability * dev * dev;
  }
  return var_w;
}

// -cov(Y, V) / var(V) from exact moments.
inline double optimal_c(const ExactMoments& m, std::size_t y, std::size_t v) {
  const double var_v = m.variance(v);
  if (!(var_v > 0.0)) throw DegenerateControlError("control V has zero variance");
  return -m.covariance(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(v)) / var_v;
}

// min over beta of var(Y + sum beta_i X_i) / var(Y), solved jointly.
inline double min_variance_ratio(const ExactMoments& m, std::size_t y,
                                 std::span<const std::size_t> xs) {
  const auto k = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd sxx(k, k);
  Eigen::VectorXd sxy(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    sxy(i) = m.covariance(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(xs[i]));
    for (Eigen::Index j = 0; j < k; ++j) {
      sxx(i, j) = m.covariance(static_cast<Eigen::Index>(xs[i]), static_cast<Eigen::Index>(xs[j]));
    }
  }
  const Eigen::VectorXd beta = sxx.ldlt().solve(sxy);
  return 1.0 - sxy.dot(beta) / m.variance(y);
}

// Probabilities from a flat Dirichlet draw.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(k);
  for (auto& x : p) x = expo(rng);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= total;
  return p;
}

struct InequalityTrial {
  IndependentFamily family;
  std::vector<double> y_table;
  std::vector<double> alpha;
};

// Three independent variables with 2 to 4 atoms each (values in [-1, 1]), Y an
// arbitrary table over the product atoms, alpha uniform in [-2, 2]^3.
inline InequalityTrial random_inequality_trial(std::mt19937_64& rng, std::size_t variables = 3) {
  std::uniform_int_distribution<std::size_t> atom_count(2, 4);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::uniform_real_distribution<double> weight(-2.0, 2.0);
  std::vector<Marginal> marginals;
  for (std::size_t v = 0; v < variables; ++v) {
    Marginal mg;
    mg.values.resize(atom_count(rng));
    for (auto& x : mg.values) x = value(rng);
    mg.probabilities = random_simplex(rng, mg.values.size());
    marginals.push_back(std::move(mg));
  }
  IndependentFamily family(std::move(marginals));
  std::vector<double> y(family.joint().atoms().size());
  for (auto& x : y) x = value(rng);
  std::vector<double> alpha(variables);
  for (auto& a : alpha) a = weight(rng);
  return {std::move(family), std::move(y), std::move(alpha)};
}

struct InequalitySummary {
  std::size_t trials = 0;
  std::size_t passes = 0;
  double max_gap = -std::numeric_limits<double>::infinity();  // max(lhs - rhs)
  CorrelationBound first;
  CorrelationBound witness;  // Y = X1, alpha = e1: both sides equal 1
  [[nodiscard]] bool all_hold() const noexcept { return passes == trials && witness.holds; }
};

inline InequalitySummary run_inequality_trials(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("trials: must be >= 1");
  std::mt19937_64 rng(seed);
  InequalitySummary summary;
  summary.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto trial = random_inequality_trial(rng);
    const auto bound = check_correlation_inequality(trial.family, trial.y_table, trial.alpha);
    if (t == 0) summary.first = bound;
    summary.max_gap = std::max(summary.max_gap, bound.lhs - bound.rhs);
    if (bound.holds) ++summary.passes;
  }
  const auto witness = random_inequality_trial(rng);
  std::vector<double> e1(witness.family.size(), 0.0);
  e1[0] = 1.0;
  summary.witness = check_correlation_inequality(
      witness.family, [](std::span<const double> x) { return x[0]; }, e1);
  return summary;
}

// A random two-variable law (Y, V) with `atoms` atoms, values in [-1, 1].
inline FiniteJointDistribution random_joint_law(std::mt19937_64& rng, std::size_t atoms) {
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  const auto p = random_simplex(rng, atoms);
  std::vector<Atom> out;
  for (std::size_t a = 0; a < atoms; ++a) out.push_back({{value(rng), value(rng)}, p[a]});
  return {{"Y", "V"}, std::move(out)};
}

}  // namespace pathcv::oracle
