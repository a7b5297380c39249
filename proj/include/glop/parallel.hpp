#ifndef GLOP_PARALLEL_HPP
#define GLOP_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace glop {

// Worker count: GLOP_THREADS if set, else hardware concurrency.
inline int num_threads() {
  if (const char* env = std::getenv("GLOP_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Items are independent; each writes only to
// its own output slot, so results are identical for any thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int threads = -1) {
  if (threads < 0) threads = num_threads();
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int t = std::min(threads, n);
  pool.reserve(t - 1);
  for (int k = 1; k < t; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace glop

#endif  // GLOP_PARALLEL_HPP
