#pragma once

#include <cstddef>
#include <functional>

namespace prf {

// Worker count: PRF_THREADS when set (>= 1), otherwise the hardware concurrency.
unsigned worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs exactly once;
// callers write results into per-index slots so the outcome does not depend on scheduling.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers = worker_count());

} // namespace prf
