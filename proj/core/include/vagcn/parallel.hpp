#pragma once

#include <cstddef>
#include <functional>

namespace vagcn {

// Process-wide worker count for data-parallel kernels. Results are bitwise
// independent of the thread count: work is split by row and every output
// element is computed in a fixed sequential order within its row.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) over disjoint chunks of [0, n). Falls back to a single
// inline call when n is small or one worker is configured.
void parallel_for(size_t n, size_t grain, const std::function<void(size_t, size_t)>& fn);

}  // namespace vagcn
