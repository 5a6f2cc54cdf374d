#pragma once

#include <cstddef>
#include <functional>

namespace spad {

/// Worker threads used for per-sample work: hardware concurrency, capped by
/// the SPAD_THREADS environment variable when it is set to a positive integer.
std::size_t worker_count();

/// Run body(i) for i in [0, n). Work items are independent; results must not
/// depend on which thread runs which item.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace spad
