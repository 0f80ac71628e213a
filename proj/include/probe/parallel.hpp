#pragma once

#include <functional>

namespace probe {

/// Default worker count: hardware concurrency, at least 1.
int default_threads();

/// Calls body(i) for i in [0, n) on up to `threads` workers. Each index runs exactly once; callers
/// write results into preallocated slots, so output never depends on scheduling. The first
/// exception thrown by a body is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace probe
