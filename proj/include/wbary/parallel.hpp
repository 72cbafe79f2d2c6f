#pragma once

#include <cstddef>
#include <functional>

namespace wbary {

// Number of worker threads. 0 means: WBARY_THREADS if set, else hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n). Each index must write only its own output slot,
// so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wbary
