#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace kfem {

/// Worker-count control. Results of every parallel loop in the library are
/// gathered in index order, so the observable output is identical for any
/// thread count. `--threads 1` is the reference serial path.
inline int& thread_count() {
  static int n = 1;
  return n;
}

inline void set_thread_count(int n) { thread_count() = std::max(1, n); }

namespace detail {
inline bool& inside_worker() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Runs body(i) for i in [0, n) over the configured workers. Each index is
/// processed exactly once; the caller owns any per-index output slots.
/// Nested invocations from inside a worker run serially.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const int workers = detail::inside_worker() ? 1 : std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      detail::inside_worker() = true;
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        body(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace kfem
