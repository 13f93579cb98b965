#pragma once

#include <cstddef>
#include <functional>

namespace gsocc {

// Environment variable consulted when no explicit thread count is given.
inline constexpr const char* kThreadsEnvVar = "GSOCC_THREADS";

// requested > 0 is returned as is. Otherwise GSOCC_THREADS if set to a
// positive integer, else std::thread::hardware_concurrency() (at least 1).
int resolve_thread_count(int requested = 0);

// Splits [0, n) into at most `threads` contiguous chunks and runs
// fn(begin, end) on each, the first chunk on the calling thread. Chunk
// boundaries depend only on n and the thread count. The first exception
// thrown by any chunk is rethrown after all chunks finish.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace gsocc
