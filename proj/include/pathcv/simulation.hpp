#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

#include "pathcv/errors.hpp"

namespace pathcv {

inline constexpr std::uint64_t kDefaultBatchSize = 4096;

struct SimulationConfig {
  std::uint64_t batch_size = kDefaultBatchSize;
  // 0 picks std::thread::hardware_concurrency().
  unsigned threads = 1;
};

// Splits runs [0, runs) into fixed-size batches, evaluates `batch_fn(first, last)`
// for each batch on a worker pool, then merges the per-batch results in ascending
// batch order. The result depends on (runs, batch_size) only, never on threads.
template <class BatchFn>
auto accumulate_batches(std::uint64_t runs, const SimulationConfig& config, BatchFn&& batch_fn)
    -> std::invoke_result_t<BatchFn&, std::uint64_t, std::uint64_t> {
  using Result = std::invoke_result_t<BatchFn&, std::uint64_t, std::uint64_t>;
  if (config.batch_size == 0) throw ValidationError("batch_size: must be >= 1");
  const std::uint64_t batches = (runs + config.batch_size - 1) / config.batch_size;
  std::vector<Result> partial(batches);

  unsigned threads = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  threads = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, std::max<std::uint64_t>(batches, 1)));

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::uint64_t b = next++; b < batches; b = next++) {
      try {
        const std::uint64_t first = b * config.batch_size;
        partial[b] = batch_fn(first, std::min(runs, first + config.batch_size));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  Result total{};
  if (batches == 0) return total;
  total = std::move(partial.front());
  for (std::uint64_t b = 1; b < batches; ++b) total.merge(partial[b]);
  return total;
}

}  // namespace pathcv
