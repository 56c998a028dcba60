// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace tagan {

/// Number of worker threads to use: min(hardware, TAGAN_THREADS if set).
/// Always at least 1.
std::size_t worker_count();

/// Run fn(i) for i in [0, n) on up to worker_count() threads using a static
/// block partition. fn must only write to per-index slots; the partition is
/// a pure function of n and the thread count, so results are reproducible as
/// long as callers never reduce across indices in thread order.
/// Exceptions thrown by fn are re-thrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tagan
