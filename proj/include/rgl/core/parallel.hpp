#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

// Index-sharded parallel map.  Workers own disjoint index slots, so results
// land in canonical order and runs are bitwise reproducible for any job count.

namespace rgl {

template <class Fn>
void parallel_for(size_t count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count < 2) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min<size_t>(jobs, count);
    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (size_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rgl
