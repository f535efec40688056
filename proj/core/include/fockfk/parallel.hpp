#ifndef FOCKFK_PARALLEL_HPP
#define FOCKFK_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace fockfk {

// Global worker count used by the Monte Carlo loops. 0 = hardware default.
int worker_count();
void set_worker_count(int jobs);

// Runs body(i) for i in [0, n). Work is handed out in fixed-size chunks so
// that any per-chunk state is independent of the number of workers; callers
// that reduce must do so over a pre-allocated index-ordered buffer.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         std::size_t chunk = 64) {
  int jobs = worker_count();
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || n <= chunk) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      const std::size_t end = begin + chunk < n ? begin + chunk : n;
      for (std::size_t i = begin; i < end; ++i) body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs) - 1);
  for (int t = 1; t < jobs; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

}  // namespace fockfk

#endif
