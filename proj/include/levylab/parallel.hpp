#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace levylab {

// Thread count for loops inside one computation; LEVYLAB_THREADS overrides.
inline unsigned thread_count() {
    if (const char* env = std::getenv("LEVYLAB_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

// Static contiguous chunks; body(i) must only write to slot i.
template <class F>
void parallel_for(std::size_t count, F&& body, std::size_t min_chunk = 1) {
    unsigned workers = thread_count();
    if (count < 2 * min_chunk || workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::size_t nthreads = std::min<std::size_t>(workers, (count + min_chunk - 1) / min_chunk);
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < nthreads; ++t) {
        std::size_t lo = count * t / nthreads;
        std::size_t hi = count * (t + 1) / nthreads;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace levylab
