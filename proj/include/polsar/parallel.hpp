#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace polsar {

/// Resolve a requested worker count; <= 0 means "use the hardware".
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(begin, end) over contiguous chunks of [0, count).
/// Every index is processed exactly once and chunking never changes what a
/// worker computes for a given index, so callers that write results by index
/// get output independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t nworkers =
      std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)),
                            count);
  if (nworkers <= 1) {
    if (count > 0) fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nworkers);
  const std::size_t chunk = (count + nworkers - 1) / nworkers;
  for (std::size_t w = 0; w < nworkers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace polsar
