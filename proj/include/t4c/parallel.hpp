#pragma once

#include <cstdint>
#include <functional>

namespace t4c {

// Process-wide worker count for the layer kernels. Default is 1; the CLI
// raises it via --threads. Results are bit-identical for any count because
// every output element is produced by exactly one worker with a fixed
// summation order.
void set_thread_count(int n);
int thread_count();

// Runs fn over [0, n) split into contiguous chunks. fn(begin, end) must only
// write state owned by its own range.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace t4c
