#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace tryon3d {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

/// Worker count used by the data-parallel pixel loops. Defaults to 1.
inline int num_threads() { return detail::thread_setting().load(std::memory_order_relaxed); }

inline void set_num_threads(int n) {
  detail::thread_setting().store(std::max(1, n), std::memory_order_relaxed);
}

/// Sets the worker count for the lifetime of the guard.
class ScopedThreads {
 public:
  explicit ScopedThreads(int n) : previous_(num_threads()) { set_num_threads(n); }
  ~ScopedThreads() { set_num_threads(previous_); }
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  int previous_;
};

/// Runs fn(row) for every row in [0, rows). Rows are split into contiguous
/// blocks, one per worker. fn must only write to state owned by its row, so
/// the result never depends on the worker count.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int workers = std::min(num_threads(), std::max(rows, 1));
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const int block = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const int begin = w * block;
        const int end = std::min(rows, begin + block);
        for (int r = begin; r < end; ++r) fn(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tryon3d
