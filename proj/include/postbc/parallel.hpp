#pragma once

#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

namespace postbc {

/// Runs body(i) for i in [0, n) across `workers` threads. Each index is
/// processed exactly once and the caller stores results by index, so the
/// merged output is identical for any worker count.
template <typename F>
void parallel_for(std::int64_t n, int workers, F&& body) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  int t = workers;
  if (static_cast<std::int64_t>(t) > n) t = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([w, t, n, &body]() {
      for (std::int64_t i = w; i < n; i += t) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline int default_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace postbc
