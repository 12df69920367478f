#pragma once

#include <cstddef>
#include <functional>

namespace branchlab {

// Worker budget: BRANCHLAB_THREADS if set, else hardware concurrency.
unsigned thread_budget();

// Runs fn(i) for i in [0,n). Work is split into contiguous index ranges;
// every index writes only its own slots, so results do not depend on the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace branchlab
