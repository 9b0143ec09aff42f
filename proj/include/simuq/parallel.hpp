#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace simuq {

/// Worker count: SIMUQ_THREADS if set and positive, otherwise the hardware
/// concurrency (minimum 1).
inline int thread_count() {
  if (const char* env = std::getenv("SIMUQ_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs body(i) for i in [0, n) across `threads` workers using a static
/// block partition. Each index is processed exactly once and typically
/// writes into its own preallocated slot, so results do not depend on
/// scheduling: outputs are identical for any thread count.
///
/// The first exception thrown by any worker is rethrown on the caller's
/// thread after all workers join.
template <class Body>
void parallel_for(std::int64_t n, Body&& body, int threads = -1) {
  if (n <= 0) return;
  if (threads < 0) threads = thread_count();
  if (threads > n) threads = static_cast<int>(n);
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::int64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace simuq
