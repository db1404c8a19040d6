#pragma once

#include <cstddef>
#include <functional>

namespace dsb {

/// Fixed chunk size used for all data-parallel loops. Reductions are done per
/// chunk and merged in chunk order, so results never depend on worker count.
inline constexpr std::size_t kChunkSize = 1024;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kChunkSize) {
  return (n + chunk - 1) / chunk;
}

/// Runs body(chunk_index, begin, end) for every chunk of [0, n) on `workers`
/// threads (0 = hardware concurrency). The first exception thrown by any
/// chunk is rethrown after all workers join.
void for_each_chunk(std::size_t n, std::size_t workers,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                    std::size_t chunk = kChunkSize);

/// Resolves a requested worker count (0 = hardware concurrency, at least 1).
std::size_t resolve_workers(std::size_t requested);

}  // namespace dsb
