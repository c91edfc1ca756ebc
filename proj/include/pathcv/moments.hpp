#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathcv/errors.hpp"

namespace pathcv {

// One-pass means and co-moments for a fixed set of variables.
//
// Updates follow Welford; merges use the pairwise combination rule
// C = C_a + C_b + (n_a n_b / n) d d^T with d = mean_b - mean_a, so batches
// accumulated independently can be folded together in any grouping.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(std::size_t dimension)
      : dim_(dimension), mean_(dimension, 0.0), comoment_(dimension * dimension, 0.0),
        delta_(dimension, 0.0) {}

  [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
  [[nodiscard]] std::uint64_t count() const noexcept { return count_; }

  void add(std::span<const double> x) {
    if (x.size() != dim_) throw ValidationError("MomentAccumulator::add: dimension mismatch");
    ++count_;
    const double inv_n = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < dim_; ++i) {
      delta_[i] = x[i] - mean_[i];
      mean_[i] += delta_[i] * inv_n;
    }
    // Upper triangle only; mirrored on read.
    for (std::size_t i = 0; i < dim_; ++i) {
      const double di = delta_[i];
      double* row = &comoment_[i * dim_];
      for (std::size_t j = i; j < dim_; ++j) row[j] += di * (x[j] - mean_[j]);
    }
  }

  void merge(const MomentAccumulator& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    if (other.dim_ != dim_) throw ValidationError("MomentAccumulator::merge: dimension mismatch");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    for (std::size_t i = 0; i < dim_; ++i) delta_[i] = other.mean_[i] - mean_[i];
    const double w = na * nb / n;
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = i; j < dim_; ++j) {
        comoment_[i * dim_ + j] += other.comoment_[i * dim_ + j] + w * delta_[i] * delta_[j];
      }
    }
    for (std::size_t i = 0; i < dim_; ++i) mean_[i] += delta_[i] * (nb / n);
    count_ += other.count_;
  }

  [[nodiscard]] double mean(std::size_t i) const { return mean_.at(i); }

  // Unbiased (count - 1) denominator.
  [[nodiscard]] double covariance(std::size_t i, std::size_t j) const {
    if (count_ < 2) throw ValidationError("covariance undefined for fewer than 2 samples");
    if (i > j) std::swap(i, j);
    if (j >= dim_) throw std::out_of_range("MomentAccumulator: variable index");
    return comoment_[i * dim_ + j] / static_cast<double>(count_ - 1);
  }
  [[nodiscard]] double variance(std::size_t i) const { return covariance(i, i); }

  // Throws when either variance is zero.
  [[nodiscard]] double correlation(std::size_t i, std::size_t j) const {
    const double vi = variance(i);
    const double vj = variance(j);
    if (!(vi > 0.0) || !(vj > 0.0)) {
      throw DegenerateControlError("correlation with a zero-variance variable");
    }
    return covariance(i, j) / std::sqrt(vi * vj);
  }

 private:
  std::size_t dim_ = 0;
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> comoment_;
  std::vector<double> delta_;  // scratch
};

}  // namespace pathcv
