#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace rigidflow {

/// Runs fn(row) for every row in [0, rows), splitting contiguous row blocks
/// across at most `threads` workers. threads <= 1 runs inline.
template <typename Fn>
void parallel_rows(int rows, int threads, Fn&& fn) {
  if (threads <= 1 || rows <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  const int workers = std::min(threads, rows);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      const int begin = rows * w / workers;
      const int end = rows * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          for (int r = begin; r < end; ++r) fn(r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace rigidflow
