#pragma once

// Worker pool used for embarrassingly parallel loops (per-particle advances,
// independent replicas). Every loop body writes to disjoint slots, so the
// schedule cannot influence results; MVP_WORKERS only changes wall time.

#include <cstddef>
#include <functional>

namespace mvp {

// Resolution order: MVP_WORKERS env var, else config value (0 = unset),
// else min(hardware_concurrency, 8).
int resolve_worker_count(int config_value);

// Runs fn(i) for i in [0, n) on up to `workers` threads with a fixed block
// partition. fn must not touch shared mutable state outside its own slots.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

} // namespace mvp
