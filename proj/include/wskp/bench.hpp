#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wskp/kernel_decoder.hpp"

namespace wskp {

struct BenchRow {
    std::string label;
    int width = 0;
    int height = 0;
    std::vector<int> sizes;
    double wall_ms = 0.0;  // median over reps
    std::size_t peak_aux_bytes = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    int threads = 1;
    int reps = 5;
};

// M = 1..6 with k_b = 3, k_s = 2.
std::vector<FusionConfig> default_sweep();

// Median wall time of filter_fuse_streaming on seeded random inputs, one row
// per config. A warm-up run precedes the timed repetitions.
BenchResult bench_reconstruction(int width, int height, std::span<const FusionConfig> sweep, int reps,
                                 std::uint64_t seed = 7);

// Explicit kernel-prediction reconstruction: every kernel map is
// materialised before filtering and fusing. Allocation failure raises
// ResourceError.
Tensor explicit_kp_oracle(const ImportanceMaps& imaps, const BlendLogits& blend, const Tensor& noisy,
                          const FusionConfig& cfg);

struct MemoryAccount {
    long total_taps = 0;              // sum of k_i^2
    std::size_t explicit_bytes = 0;   // 4 H W sum k_i^2
    std::size_t streaming_bytes = 0;  // 4 H W (2M + 6)
};

MemoryAccount memory_accounting(const FusionConfig& cfg, int width, int height);

// Seeded random inputs for one config.
struct ReconstructionInputs {
    ImportanceMaps imaps;
    BlendLogits blend;
    Tensor noisy;
};
ReconstructionInputs random_reconstruction_inputs(int width, int height, int kernel_count,
                                                  std::uint64_t seed);

std::string sizes_label(const std::vector<int>& sizes);

void write_bench_csv(const BenchResult& result, const std::filesystem::path& path);

} // namespace wskp
