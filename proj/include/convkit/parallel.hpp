#pragma once

#include <cstddef>
#include <functional>

namespace convkit {

/// Worker count from CONVKIT_THREADS; unset or 0 means hardware concurrency.
std::size_t worker_count();

/// Calls fn(i) for i in [0, count) on up to worker_count() threads. The first
/// exception thrown (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace convkit
