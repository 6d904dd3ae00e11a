#pragma once

#include <cstddef>
#include <functional>

namespace pscal {

/// Runs fn(i) for i in [0, n) on up to `workers` threads (static contiguous
/// partition). Each index must touch only its own output slot; any merging is
/// done by the caller in index order, so results never depend on the worker
/// count. The first exception (lowest chunk) is rethrown after join.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

} // namespace pscal
