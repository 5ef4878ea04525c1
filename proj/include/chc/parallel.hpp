// ============================================================================
// chc/parallel.hpp - index-parallel loop over independent Monte-Carlo samples
// ============================================================================
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace chc {

inline unsigned default_workers()
{
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads. fn must only
/// write to per-index storage. The exception of the lowest failing index is
/// rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn)
{
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

}  // namespace chc
