#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace glms {

// Strided parallel loop.  Work item i writes only to slot i of preallocated
// outputs, so results are identical for any thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int t_count = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(t_count);
  for (int t = 0; t < t_count; ++t)
    pool.emplace_back([&, t]() {
      for (int i = t; i < n; i += t_count) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace glms
