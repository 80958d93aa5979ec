#pragma once

#include <cstddef>
#include <functional>

namespace tailrisk {

/// Number of worker threads to use when the caller does not say: the
/// TAILRISK_JOBS environment variable if set, else hardware concurrency.
int default_jobs();

/// Calls body(i) for i in [0, n) on up to `jobs` threads. Each index runs
/// exactly once; results must be written to per-index slots so the outcome
/// does not depend on scheduling. The exception of the lowest failing index
/// is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace tailrisk
