#pragma once

#include <cstddef>
#include <functional>

namespace emotion {

/// Worker count: RAU_EMOTION_THREADS when set and positive, otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Overrides the worker count for the process; 0 restores the default.
void set_worker_count(std::size_t n);

/// Runs body(i) for every i in [0, n). Indices are split into contiguous
/// ranges, one per worker. The body must only write state owned by index i,
/// so results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace emotion
