#include "wskp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <new>
#include <random>

#include "wskp/alloc_tracker.hpp"
#include "wskp/errors.hpp"
#include "wskp/parallel.hpp"

namespace wskp {

std::vector<FusionConfig> default_sweep()
{
    std::vector<FusionConfig> sweep;
    for (int m = 1; m <= 6; ++m) {
        sweep.push_back(FusionConfig{m, 3, 2});
    }
    return sweep;
}

ReconstructionInputs random_reconstruction_inputs(int width, int height, int kernel_count,
                                                  std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto uniform = [&](float lo, float hi) {
        return lo + (hi - lo) * static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    ReconstructionInputs in{ImportanceMaps{Tensor(height, width, kernel_count)},
                            BlendLogits{Tensor(height, width, kernel_count)}, Tensor(height, width, 3)};
    for (float& v : in.imaps.maps.values()) {
        v = uniform(-2.0f, 2.0f);
    }
    for (float& v : in.blend.logits.values()) {
        v = uniform(-2.0f, 2.0f);
    }
    for (float& v : in.noisy.values()) {
        v = uniform(0.0f, 4.0f);
    }
    return in;
}

std::string sizes_label(const std::vector<int>& sizes)
{
    std::string s;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        s += (i ? ";" : "") + std::to_string(sizes[i]);
    }
    return s;
}

BenchResult bench_reconstruction(int width, int height, std::span<const FusionConfig> sweep, int reps,
                                 std::uint64_t seed)
{
    if (reps < 5) {
        throw ConfigError("bench needs at least 5 repetitions");
    }
    BenchResult result;
    result.threads = thread_count();
    result.reps = reps;
    for (const FusionConfig& cfg : sweep) {
        cfg.validate_for(height, width);
        const ReconstructionInputs in = random_reconstruction_inputs(width, height, cfg.kernel_count, seed);
        BenchRow row;
        row.label = "M" + std::to_string(cfg.kernel_count);
        row.width = width;
        row.height = height;
        row.sizes = cfg.sizes();
        {
            alloc_tracker::PeakScope scope;
            const Tensor warm = filter_fuse_streaming(in.imaps, in.blend, in.noisy, cfg);
            row.peak_aux_bytes = scope.peak_above_baseline();
        }
        std::vector<double> times;
        for (int r = 0; r < reps; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const Tensor out = filter_fuse_streaming(in.imaps, in.blend, in.noisy, cfg);
            times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        std::nth_element(times.begin(), times.begin() + reps / 2, times.end());
        row.wall_ms = times[reps / 2];
        result.rows.push_back(std::move(row));
    }
    return result;
}

Tensor explicit_kp_oracle(const ImportanceMaps& imaps, const BlendLogits& blend, const Tensor& noisy,
                          const FusionConfig& cfg)
{
    cfg.validate_for(noisy.height(), noisy.width());
    if (imaps.maps.channels() != cfg.kernel_count || !imaps.maps.same_extent(noisy)) {
        throw DimensionError("explicit_kp_oracle: importance maps do not match the config");
    }
    try {
        std::vector<KernelMap> maps;
        maps.reserve(cfg.kernel_count);
        for (int i = 0; i < cfg.kernel_count; ++i) {
            maps.push_back(construct_kernel_map(imaps.maps.channel_slice(i, 1), cfg.size(i)));
        }
        std::vector<Tensor> filtered;
        filtered.reserve(cfg.kernel_count);
        for (const KernelMap& km : maps) {
            filtered.push_back(apply_kernel_map(km, noisy));
        }
        return fuse(filtered, blend);
    } catch (const std::bad_alloc&) {
        throw ResourceError("explicit kernel maps do not fit in memory (" +
                            std::to_string(memory_accounting(cfg, noisy.width(), noisy.height()).explicit_bytes) +
                            " bytes)");
    }
}

MemoryAccount memory_accounting(const FusionConfig& cfg, int width, int height)
{
    MemoryAccount m;
    m.total_taps = cfg.total_taps();
    const std::size_t px = static_cast<std::size_t>(width) * height;
    m.explicit_bytes = 4 * px * static_cast<std::size_t>(m.total_taps);
    m.streaming_bytes = 4 * px * static_cast<std::size_t>(2 * cfg.kernel_count + 6);
    return m;
}

void write_bench_csv(const BenchResult& result, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "label,width,height,sizes,wall_ms,peak_aux_bytes\n";
    for (const BenchRow& r : result.rows) {
        out << r.label << ',' << r.width << ',' << r.height << ',' << sizes_label(r.sizes) << ','
            << r.wall_ms << ',' << r.peak_aux_bytes << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace wskp
