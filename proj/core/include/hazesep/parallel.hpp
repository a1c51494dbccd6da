#pragma once

#include <cstddef>
#include <functional>

namespace hazesep {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Work is split into contiguous index blocks, so callers that
/// write to per-index slots get results independent of the thread count.
/// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::size_t default_thread_count() noexcept;

}  // namespace hazesep
