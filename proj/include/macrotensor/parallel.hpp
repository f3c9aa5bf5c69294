#pragma once

#include <cstddef>
#include <functional>

namespace macrotensor {

/// Worker count: MACROTENSOR_THREADS when set and positive, otherwise
/// std::thread::hardware_concurrency() (0 means auto).
std::size_t thread_count();

/// Runs body(0..n-1) over up to thread_count() threads. Each index runs
/// exactly once and callers write results into per-index slots, so the
/// outcome does not depend on scheduling. The first exception thrown by any
/// body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace macrotensor
