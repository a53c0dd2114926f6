#pragma once

#include <cstddef>
#include <functional>

namespace navmem {

/// Worker cap from NAV_THREADS, else hardware concurrency (at least 1).
int worker_count();

/// Runs fn(i) for i in [0, n). Results must be written by index; the first
/// exception (lowest index) is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace navmem
