#pragma once

#include <cstddef>
#include <functional>

namespace demcloud {

// Worker cap for parallel_for; 0 means hardware concurrency.
void set_thread_cap(unsigned n);
unsigned thread_count();

// Runs fn(i) for i in [0, n). Work items must be independent; the first
// exception thrown by any item is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace demcloud
