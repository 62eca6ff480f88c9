#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "wskp/alloc_tracker.hpp"
#include "wskp/bench.hpp"
#include "wskp/errors.hpp"

using namespace wskp;
using wskp::testing::max_abs_diff;
namespace fs = std::filesystem;

TEST_CASE("memory accounting")
{
    const MemoryAccount m = memory_accounting(FusionConfig{}, 1280, 720);
    CHECK(m.total_taps == 454);
    CHECK(m.explicit_bytes == 4ull * 1280 * 720 * 454);
    CHECK(m.streaming_bytes == 4ull * 1280 * 720 * 18);
    CHECK(static_cast<double>(m.explicit_bytes) / m.streaming_bytes == doctest::Approx(454.0 / 18.0));
}

TEST_CASE("explicit oracle matches streaming and allocates the kernel maps")
{
    const FusionConfig cfg{3, 3, 2};
    const ReconstructionInputs in = random_reconstruction_inputs(48, 40, 3, 3);
    std::size_t explicit_peak = 0;
    Tensor e;
    {
        alloc_tracker::PeakScope scope;
        e = explicit_kp_oracle(in.imaps, in.blend, in.noisy, cfg);
        explicit_peak = scope.peak_above_baseline();
    }
    std::size_t streaming_peak = 0;
    Tensor s;
    {
        alloc_tracker::PeakScope scope;
        s = filter_fuse_streaming(in.imaps, in.blend, in.noisy, cfg);
        streaming_peak = scope.peak_above_baseline();
    }
    CHECK(max_abs_diff(e, s) <= 1e-5);
    const MemoryAccount m = memory_accounting(cfg, 48, 40);
    CHECK(explicit_peak >= m.explicit_bytes);
    // no buffer with a k*k channel dimension: the largest kernel map alone is 48*40*49 floats
    CHECK(streaming_peak < 4u * 48 * 40 * 49);
    CHECK(streaming_peak <= m.streaming_bytes * 3 / 2);
}

TEST_CASE("bench rows")
{
    const std::vector<FusionConfig> sweep = default_sweep();
    REQUIRE(sweep.size() == 6);
    CHECK(sweep[5].total_taps() == 454);
    const BenchResult r = bench_reconstruction(64, 48, sweep, 5);
    REQUIRE(r.rows.size() == 6);
    CHECK(r.rows[0].label == "M1");
    CHECK(r.rows[5].sizes == std::vector<int>{3, 5, 7, 9, 11, 13});
    for (const BenchRow& row : r.rows) {
        CHECK(row.wall_ms > 0.0);
    }
    CHECK_THROWS_AS(bench_reconstruction(64, 48, sweep, 4), ConfigError);

    const fs::path p = fs::temp_directory_path() / "wskp_unit" / "bench.csv";
    fs::create_directories(p.parent_path());
    write_bench_csv(r, p);
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "label,width,height,sizes,wall_ms,peak_aux_bytes");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
    }
    CHECK(rows == 6);
    CHECK(sizes_label({3, 5}) == "3;5");
}
