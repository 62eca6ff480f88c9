#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "wskp/preprocess.hpp"

namespace wskp {

enum class NoiseModel { exponential, gaussian };

const char* noise_model_name(NoiseModel model);
// Accepts "exp"/"exponential" and "gauss"/"gaussian".
NoiseModel parse_noise_model(const std::string& text);

// Procedural heightfield scene seen by an orthographic camera that pans
// along +x by camera_speed pixels per frame.
struct SceneConfig {
    std::uint64_t seed = 1;
    // Seeds the per-pixel noise. Defaults to `seed` when unset, so changing
    // it alone keeps the scene and all noise-free buffers fixed.
    std::optional<std::uint64_t> noise_seed;
    int width = 256;
    int height = 256;
    int frames = 8;
    NoiseModel noise_model = NoiseModel::exponential;
    int camera_speed = 1;
    float texture_freq = 6.0f;  // albedo cycles per image width

    std::uint64_t effective_noise_seed() const noexcept { return noise_seed.value_or(seed); }
    void validate() const;
};

// Noise-free buffers of one frame; radiance equals the reference.
FrameBundle render_clean(const SceneConfig& cfg, int frame_index);

// Multiplies irradiance by a unit-mean per-pixel factor drawn from the noise
// model. `stream` selects an independent noise stream (frame index).
Tensor apply_noise(const Tensor& reference, NoiseModel model, std::uint64_t noise_seed,
                   std::uint64_t stream);

FrameBundle generate_frame(const SceneConfig& cfg, int frame_index);

// Diagonal of the world-space bounding box covered by the whole sequence.
double scene_scale(const SceneConfig& cfg);

// Writes frame_####/ directories and meta.json under out_dir.
void write_dataset(const SceneConfig& cfg, const std::filesystem::path& out_dir);

} // namespace wskp
