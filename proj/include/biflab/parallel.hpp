#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace biflab {

// Worker count: min(hardware, BIFLAB_THREADS) with BIFLAB_THREADS=0 meaning serial.
inline int worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("BIFLAB_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 0 && static_cast<unsigned long>(cap) < hw) hw = static_cast<unsigned>(cap);
        if (hw == 0) return 1;
    }
    return static_cast<int>(hw);
}

// Parallel loop over [0, n). Each index must be a pure function of its inputs,
// so the result is independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int workers = worker_count();
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const std::size_t chunk = std::max<std::size_t>(1, n / (static_cast<std::size_t>(workers) * 8));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t begin = next.fetch_add(chunk);
                if (begin >= n) return;
                std::size_t end = std::min(n, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace biflab
