#pragma once

#include <cstdint>
#include <functional>

namespace ionlab {

// Number of workers actually used for `requested` (<= 0 selects hardware
// concurrency), never more than n items.
int resolve_thread_count(int requested, std::int64_t n_items);

// Runs fn(worker, first, last) over a static contiguous partition of
// [0, n_items). Worker 0 runs on the calling thread. Exceptions from
// workers are rethrown on the caller.
void parallel_blocks(
    std::int64_t n_items, int n_threads,
    const std::function<void(int worker, std::int64_t first, std::int64_t last)>&
        fn);

}  // namespace ionlab
