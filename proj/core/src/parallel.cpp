#include "shapmarket/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shapmarket {

int worker_threads() {
    static const int cached = [] {
        const char* env = std::getenv("SHAPMARKET_THREADS");
        if (env == nullptr || *env == '\0') return 1;
        int value = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
        if (ec != std::errc() || ptr != env + std::strlen(env) || value < 1) return 1;
        return std::min(value, 256);
    }();
    return cached;
}

namespace {
thread_local bool g_inside_parallel_region = false;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    const int threads = worker_threads();
    if (g_inside_parallel_region || threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mu;

    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = n * w / workers;
        const std::size_t hi = n * (w + 1) / workers;
        pool.emplace_back([&, lo, hi] {
            g_inside_parallel_region = true;
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace shapmarket
