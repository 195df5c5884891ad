#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace shapeopt {

/// Process-wide worker count for cell loops (>= 1).
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n) split into contiguous chunks. Bodies must only
/// write to per-index storage; results are then independent of the thread
/// count.
template <class Body>
void parallel_for(int n, Body&& body) {
  const int workers = std::min(num_threads(), std::max(1, n / 256));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([begin, end, &body] {
      for (int i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace shapeopt
