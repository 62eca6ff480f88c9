#include "wskp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace wskp {

namespace {

std::atomic<int> g_override{0};
thread_local bool t_inside_worker = false;

int default_thread_count()
{
    if (const char* env = std::getenv("WSKP_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace

int thread_count()
{
    const int forced = g_override.load();
    if (forced > 0) {
        return forced;
    }
    static const int cached = default_thread_count();
    return cached;
}

void set_thread_count(int count)
{
    g_override.store(std::max(0, count));
}

void parallel_for(int begin, int end, const std::function<void(int, int)>& body)
{
    const int n = end - begin;
    if (n <= 0) {
        return;
    }
    // Nested calls from inside a worker run inline instead of oversubscribing.
    const int workers = t_inside_worker ? 1 : std::min(thread_count(), n);
    if (workers <= 1) {
        body(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        const int lo = begin + static_cast<int>(static_cast<long long>(n) * w / workers);
        const int hi = begin + static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
        pool.emplace_back([&, w, lo, hi] {
            t_inside_worker = true;
            try {
                body(lo, hi);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace wskp
