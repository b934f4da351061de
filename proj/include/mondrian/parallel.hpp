#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace mondrian {

/// Runs fn(i) for i in [0, n), chunked over up to num_threads workers.
/// num_threads <= 1 runs inline. fn must not touch shared mutable state
/// except through its own index.
inline void parallel_for(std::size_t n, unsigned num_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (num_threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(num_threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mondrian
