#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

// Deterministic work distribution: tasks pull indices from a shared counter
// and write results into caller-owned, index-addressed slots.  Output is then
// a pure function of the per-index work, independent of thread count or
// scheduling order.

namespace llp {

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  unsigned count = threads < n ? threads : static_cast<unsigned>(n);
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace llp
