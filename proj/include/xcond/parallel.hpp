#pragma once

#include <cstddef>
#include <functional>

namespace xcond {

// Worker count from XCOND_WORKERS, else hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(0..n-1) over a bounded pool. Calls made from inside a worker run serially.
// The exception from the lowest failing index is rethrown after all work stops.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace xcond
