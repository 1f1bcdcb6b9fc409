#pragma once
#include <cstddef>
#include <functional>

namespace flcleaner {

/// Worker count: min(hardware_concurrency, FLCLEANER_THREADS if set).
int thread_cap();

/// Run fn(i) for i in [0, n). Work items must be independent; each writes
/// only its own output slot, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace flcleaner
