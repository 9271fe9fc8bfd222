#pragma once

#include <cstddef>
#include <functional>

namespace shapmarket {

// Number of worker threads used by parallel_for. Reads SHAPMARKET_THREADS
// once per process; falls back to 1 when unset or unparsable, so runs are
// sequential (and trivially deterministic) by default.
int worker_threads();

// Deterministic parallel loop: the index space [0, n) is split into
// contiguous chunks, each worker writes only to its own indices, and the
// call joins before returning. Results never depend on scheduling because
// body(i) must touch only state owned by index i.
//
// Nested calls run sequentially on the caller's thread to avoid
// oversubscription.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace shapmarket
