#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dpslm {

// Caps the worker pool used by parallel helpers. 0 = hardware concurrency.
// Thread count must never change output bytes, so all reductions below are
// combined in a fixed block order that is independent of the pool size.
void set_worker_threads(unsigned n);
unsigned worker_threads();

namespace detail {

inline constexpr std::size_t kBlock = 4096;

inline unsigned effective_threads(std::size_t n_blocks) {
  unsigned t = worker_threads();
  if (t == 0) t = std::thread::hardware_concurrency();
  if (t == 0) t = 1;
  if (static_cast<std::size_t>(t) > n_blocks) t = static_cast<unsigned>(n_blocks);
  return t;
}

}  // namespace detail

// Runs fn(block_index, begin, end) over [0, n) split into fixed-size blocks.
// Blocks are claimed by workers in any order; callers that reduce must store
// per-block results and combine them in block order afterwards.
template <typename Fn>
void parallel_blocks(std::size_t n, Fn&& fn) {
  if (n == 0) return;
  const std::size_t n_blocks = (n + detail::kBlock - 1) / detail::kBlock;
  const unsigned threads = detail::effective_threads(n_blocks);
  if (threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      fn(b, b * detail::kBlock, std::min(n, (b + 1) * detail::kBlock));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= n_blocks) return;
        try {
          fn(b, b * detail::kBlock, std::min(n, (b + 1) * detail::kBlock));
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::size_t n_blocks_for(std::size_t n) {
  return n == 0 ? 0 : (n + detail::kBlock - 1) / detail::kBlock;
}

}  // namespace dpslm
