#pragma once

#include <cstddef>
#include <functional>

namespace trb {

/// Run body(i) for i in [0, n) on up to `threads` workers.
///
/// Work is dealt in contiguous static chunks and each index is independent,
/// so callers that key their RNG streams by i (see Rng) produce identical
/// results for every thread count — the contract behind the reproducibility
/// guarantee.  threads <= 1 runs inline.  Exceptions from workers are
/// rethrown on the calling thread.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

} // namespace trb
