#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lofpc {

namespace detail {
inline std::atomic<int>& default_threads_slot() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

/// Process-wide default worker count (the CLI's --threads). 0 means hardware
/// concurrency. Results never depend on it.
inline void set_default_threads(int n) { detail::default_threads_slot() = n; }

inline int resolve_threads(int requested) {
  int n = requested > 0 ? requested : detail::default_threads_slot().load();
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

/// Calls fn(i) for i in [0, n). Work is split into contiguous blocks; fn must
/// write only to slots owned by i. The first exception (by lowest failing
/// block) is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)), n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / t, hi = n * (w + 1) / t;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lofpc
