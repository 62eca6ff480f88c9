#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "wskp/network.hpp"
#include "wskp/preprocess.hpp"

namespace wskp {

// Which side of remodulation the loss sees.
enum class LossSpace { radiance, irradiance };

struct TrainConfig {
    NetworkConfig net = six_layer_config();
    int epochs = 50;
    int batch_size = 64;
    float lr = 1e-3f;
    int patch_size = 128;
    int train_patches_per_frame = 80;
    int val_patches_per_frame = 20;
    std::uint64_t seed = 1;
    float loss_eps = 0.01f;
    LossSpace loss_space = LossSpace::radiance;
    float gamma = 2.2f;
    float albedo_eps = 1e-3f;

    void validate() const;
};

// One frame after temporal accumulation, ready for the network.
struct PreparedFrame {
    int frame_index = 0;
    Tensor packed;      // H x W x 10 network input
    Tensor irradiance;  // demodulated accumulated radiance, the filtering target
    Tensor albedo;
    Tensor noisy;       // raw per-frame radiance before accumulation
    Tensor reference;   // empty when the dataset has none
};

std::vector<PreparedFrame> prepare_sequence(const std::vector<FrameBundle>& frames,
                                            const TemporalConfig& temporal, float gamma,
                                            float albedo_eps = 1e-3f);

struct EpochStats {
    int epoch = 0;  // 0 = untrained network
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    NetworkParams params;  // best-validation parameters
    std::vector<EpochStats> curve;
    int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains on patches cut from `frames` (which must carry references).
// Deterministic for a given seed.
TrainResult train(const std::vector<PreparedFrame>& frames, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Network + reconstruction + remodulation for one prepared frame (or patch).
Tensor denoise_frame(const PreparedFrame& frame, const NetworkParams& params, BlockMode mode);

void write_loss_curve(const TrainResult& result, const std::filesystem::path& path);

} // namespace wskp
