#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "wskp/alloc_tracker.hpp"
#include "wskp/parallel.hpp"

using namespace wskp;

TEST_CASE("parallel_for covers the range once")
{
    for (int threads : {1, 2, 3, 8}) {
        set_thread_count(threads);
        std::vector<std::atomic<int>> hits(101);
        parallel_for(0, 101, [&](int a, int b) {
            for (int i = a; i < b; ++i) {
                hits[i]++;
            }
        });
        for (auto& h : hits) {
            REQUIRE(h.load() == 1);
        }
    }
    std::atomic<int> nested{0};
    parallel_for(0, 4, [&](int a, int b) {
        for (int i = a; i < b; ++i) {
            parallel_for(0, 3, [&](int c, int d) { nested += d - c; });
        }
    });
    CHECK(nested.load() == 12);
    CHECK_THROWS_AS(parallel_for(0, 10, [](int, int) { throw std::runtime_error("boom"); }), std::runtime_error);
    parallel_for(5, 5, [](int, int) { FAIL("empty range must not call the body"); });
    set_thread_count(0);
    CHECK(thread_count() >= 1);
}

TEST_CASE("allocation tracker")
{
    alloc_tracker::PeakScope scope;
    {
        std::vector<char> big(1 << 20);
        big[5] = 1;
    }
    CHECK(scope.peak_above_baseline() >= (1u << 20));
    const std::size_t before = alloc_tracker::current_bytes();
    double* volatile p = new double[1000];
    CHECK(alloc_tracker::current_bytes() >= before + 8000);
    delete[] p;
    CHECK(alloc_tracker::current_bytes() == before);
}
