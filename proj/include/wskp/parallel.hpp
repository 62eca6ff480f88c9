#pragma once

#include <functional>

namespace wskp {

// Worker count: WSKP_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int thread_count();

// Overrides the worker count for the current process; 0 restores the
// environment/hardware default.
void set_thread_count(int count);

// Splits [begin, end) into contiguous chunks, one per worker, and runs
// body(chunk_begin, chunk_end) on each. Chunks are disjoint so callers that
// write only inside their chunk produce partition-independent results.
void parallel_for(int begin, int end, const std::function<void(int, int)>& body);

} // namespace wskp
