#pragma once

#include <cstddef>
#include <functional>

namespace kz {

/// Pool size: KZ_THREADS if set to a positive integer, else the hardware concurrency.
std::size_t worker_count();

/// Runs body(0..n-1) on up to `workers` threads. Each index is processed
/// exactly once; results must be written to per-index slots. If any call
/// throws, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t workers = worker_count());

}  // namespace kz
