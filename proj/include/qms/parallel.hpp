#pragma once

#include <cstddef>
#include <functional>

namespace qms {

/// Worker count used by parallel_for. 0 means one per hardware thread.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write to per-index slots so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qms
