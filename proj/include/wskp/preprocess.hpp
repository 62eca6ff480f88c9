#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wskp/tensor.hpp"

namespace wskp {

// One rendered frame: noisy radiance plus noise-free auxiliary buffers.
struct FrameBundle {
    Tensor radiance;   // H x W x 3, HDR
    Tensor albedo;     // H x W x 3, [0, 1]
    Tensor normal;     // H x W x 3, scaled from [-1, 1] to [0, 1]
    Tensor depth;      // H x W x 1, [0, 1]
    Tensor world_pos;  // H x W x 3, scene units
    Tensor motion;     // H x W x 2, (dx, dy) offset to the previous frame
    std::optional<Tensor> reference;  // H x W x 3, HDR
    int frame_index = 0;

    int height() const noexcept { return radiance.height(); }
    int width() const noexcept { return radiance.width(); }

    // Throws DimensionError on inconsistent buffer shapes.
    void validate() const;
};

// Per-pixel boolean mask.
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    PixelMask() = default;
    PixelMask(int h, int w, bool value);

    bool operator()(int y, int x) const noexcept
    {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int y, int x, bool v) noexcept { bits[static_cast<std::size_t>(y) * width + x] = v; }
    std::size_t count() const noexcept;
};

struct TemporalState {
    Tensor accum_radiance;
    Tensor prev_world_pos;
    Tensor prev_normal;
    PixelMask valid;

    // Zero buffers with an all-false valid mask.
    static TemporalState empty(int height, int width);
};

// clamp(hdr, 0, 1)^(1 / gamma). Negative inputs raise DomainError.
Tensor tone_map(const Tensor& hdr, float gamma);

// radiance / max(albedo, eps)
Tensor demodulate_albedo(const Tensor& radiance, const Tensor& albedo, float eps = 1e-3f);

// irradiance * albedo
Tensor remodulate_albedo(const Tensor& irradiance, const Tensor& albedo);

struct Reprojection {
    Tensor radiance;
    Tensor world_pos;
    Tensor normal;
    PixelMask in_bounds;
};

// Nearest-pixel fetch of the previous buffers at p + motion(p).
Reprojection reproject(const TemporalState& prev, const Tensor& motion);

// Geometry test: world positions closer than pos_tol and unit normals (after
// unscaling to [-1, 1]) with a dot product above normal_tol.
PixelMask consistency_test(const Tensor& cur_pos, const Tensor& cur_normal,
                           const Tensor& warped_pos, const Tensor& warped_normal, float pos_tol,
                           float normal_tol);

struct Accumulation {
    Tensor radiance;
    PixelMask effective;
};

// Exponential moving average where mask holds; elsewhere the current frame
// passes through unchanged.
Accumulation temporal_accumulate(const Tensor& cur_radiance, const Tensor& warped_radiance,
                                 const PixelMask& mask, float blend_alpha);

struct TemporalConfig {
    bool enabled = true;
    float blend_alpha = 0.2f;
    float pos_tol = 0.01f;
    float normal_tol = 0.9f;
};

// Owns the TemporalState across a frame sequence.
class TemporalAccumulator {
public:
    explicit TemporalAccumulator(TemporalConfig cfg) : cfg_(cfg) {}

    // Returns the accumulated radiance for this frame and advances the history.
    Tensor process(const FrameBundle& frame);

    // Fraction of pixels that reused history in the last processed frame.
    double last_reuse_fraction() const noexcept { return last_reuse_; }

private:
    TemporalConfig cfg_;
    std::optional<TemporalState> state_;
    double last_reuse_ = 0.0;
};

// 10-channel network input: tone-mapped colour, albedo, normal, depth.
Tensor pack_inputs(const FrameBundle& bundle, const Tensor& accum_radiance, float gamma);

inline constexpr int kPackedChannels = 10;

} // namespace wskp
