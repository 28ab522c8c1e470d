#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace calreif {

// Worker count used by parallel_for. Defaults to the hardware count;
// results never depend on it because all reductions are index-ordered.
int worker_count();
void set_worker_count(int n);

namespace detail {
inline int& worker_count_slot() {
  static int n = static_cast<int>(std::thread::hardware_concurrency());
  return n;
}
}  // namespace detail

inline int worker_count() {
  int n = detail::worker_count_slot();
  return n > 0 ? n : 1;
}

inline void set_worker_count(int n) { detail::worker_count_slot() = n; }

// Runs fn(i) for i in [0, count). Work is split into contiguous chunks;
// fn must write only to per-index slots so the result is identical to the
// serial loop regardless of the worker count.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const int workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace calreif
