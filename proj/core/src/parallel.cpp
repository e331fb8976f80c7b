#include "vagcn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace vagcn {

namespace {
std::atomic<int> g_threads{0};  // 0 = not configured yet
}

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int num_threads() {
    int n = g_threads.load();
    if (n == 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n < 1) n = 1;
        g_threads.store(n);
    }
    return n;
}

void parallel_for(size_t n, size_t grain, const std::function<void(size_t, size_t)>& fn) {
    if (n == 0) return;
    const int workers = num_threads();
    if (workers <= 1 || n <= grain) {
        fn(0, n);
        return;
    }
    const size_t chunks = std::min<size_t>(static_cast<size_t>(workers), (n + grain - 1) / grain);
    const size_t per = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks - 1);
    for (size_t c = 1; c < chunks; ++c) {
        const size_t b = c * per;
        const size_t e = std::min(n, b + per);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    fn(0, std::min(n, per));
    for (auto& t : pool) t.join();
}

}  // namespace vagcn
