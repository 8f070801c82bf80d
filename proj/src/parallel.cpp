#include "covdet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace covdet {

namespace {
int g_threads = 0;
}

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int threads() {
    if (g_threads > 0) return g_threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_blocks(int n_blocks, const std::function<void(int)>& fn) {
    const int nt = std::min(threads(), n_blocks);
    if (nt <= 1) {
        for (int b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int b = next.fetch_add(1);
                if (b >= n_blocks) return;
                fn(b);
            }
        });
    }
    for (auto& th : pool) th.join();
}

void parallel_ranges(std::size_t n, int max_blocks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const int nb = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_blocks))));
    const std::size_t base = n / static_cast<std::size_t>(nb);
    const std::size_t rem = n % static_cast<std::size_t>(nb);
    parallel_blocks(nb, [&](int b) {
        const std::size_t ub = static_cast<std::size_t>(b);
        const std::size_t begin = ub * base + std::min(ub, rem);
        const std::size_t end = begin + base + (ub < rem ? 1 : 0);
        fn(b, begin, end);
    });
}

} // namespace covdet
