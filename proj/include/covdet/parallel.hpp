#pragma once

#include <cstddef>
#include <functional>

namespace covdet {

// Global worker count for data-parallel loops. 0 = hardware concurrency.
void set_threads(int n);
int threads();

// Runs fn(block_index) for block_index in [0, n_blocks). Work is split by
// block, and callers that accumulate per-block partials must reduce them in
// block order themselves; the block partition never depends on the thread
// count, so results are identical for any --threads value.
void parallel_blocks(int n_blocks, const std::function<void(int)>& fn);

// Convenience: split [0, n) into at most max_blocks contiguous ranges and run
// fn(block, begin, end). Block boundaries depend only on n and max_blocks.
void parallel_ranges(std::size_t n, int max_blocks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

// Fixed block count used for batch-dimension parallelism in training.
inline constexpr int kBatchBlocks = 16;

} // namespace covdet
