// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace shelltrack {

/// Run f(block) for block = 0..nblocks-1 on up to `threads` workers.
/// Work is partitioned by block index, not by thread, so results written
/// into per-block slots are identical for any thread count; callers merge
/// the slots in block order afterwards.
template <class F>
void parallel_blocks(int nblocks, int threads, F&& f) {
  if (threads <= 1 || nblocks <= 1) {
    for (int b = 0; b < nblocks; ++b) f(b);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    while (true) {
      const int b = next.fetch_add(1);
      if (b >= nblocks) return;
      f(b);
    }
  };
  const int n = std::min(threads, nblocks);
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 4 : static_cast<int>(hw > 16 ? 16 : hw);
}

}  // namespace shelltrack
