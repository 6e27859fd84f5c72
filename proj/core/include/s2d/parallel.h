#pragma once

#include <cstddef>
#include <functional>

namespace s2d {

// Process-wide worker cap. Defaults to the hardware concurrency.
void SetNumThreads(int num_threads);
int NumThreads();

// Runs fn(i) for every i in [begin, end). Work is split into contiguous
// chunks of at least `grain` indices; each index is visited exactly once, so
// callers writing only to slot i get results independent of the thread count.
void ParallelFor(std::size_t begin, std::size_t end, std::size_t grain,
                 const std::function<void(std::size_t)>& fn);

}  // namespace s2d
