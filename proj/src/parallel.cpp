#include "ionlab/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace ionlab {

int resolve_thread_count(int requested, std::int64_t n_items) {
  int n = requested;
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
  }
  if (n_items < n) n = static_cast<int>(std::max<std::int64_t>(n_items, 1));
  return n;
}

void parallel_blocks(
    std::int64_t n_items, int n_threads,
    const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  if (n_items <= 0) return;
  const int n = resolve_thread_count(n_threads, n_items);

  // Static contiguous partition: worker w gets [bounds[w], bounds[w+1]).
  std::vector<std::int64_t> bounds(n + 1);
  for (int w = 0; w <= n; ++w) bounds[w] = n_items * w / n;

  if (n == 1) {
    fn(0, 0, n_items);
    return;
  }

  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(n - 1);
  for (int w = 1; w < n; ++w) {
    pool.emplace_back([&, w] {
      try {
        fn(w, bounds[w], bounds[w + 1]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    fn(0, bounds[0], bounds[1]);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ionlab
