#include "t4c/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "t4c/error.hpp"

namespace t4c {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) {
  check(n >= 1, "thread count must be >= 1");
  g_threads.store(n);
}

int thread_count() { return g_threads.load(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int workers = std::min<int64_t>(g_threads.load(), n);
  // Too little work per worker: thread spawn overhead dominates.
  if (workers <= 1 || n < 4 * workers) {
    fn(0, n);
    return;
  }
  int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) {
    int64_t begin = t * chunk;
    int64_t end = std::min<int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end);
  }
  fn(0, std::min<int64_t>(chunk, n));
  for (auto& th : pool) th.join();
}

}  // namespace t4c
