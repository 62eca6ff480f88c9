#include "wskp/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wskp/errors.hpp"

namespace wskp {

namespace {

void require_shape(const Tensor& t, int h, int w, int c, const char* name)
{
    if (t.height() != h || t.width() != w || t.channels() != c) {
        throw DimensionError(std::string(name) + " is " + std::to_string(t.height()) + "x" +
                             std::to_string(t.width()) + "x" + std::to_string(t.channels()) +
                             ", expected " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                             std::to_string(c));
    }
}

void require_same(const Tensor& a, const Tensor& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": dimension mismatch");
    }
}

} // namespace

void FrameBundle::validate() const
{
    const int h = radiance.height();
    const int w = radiance.width();
    require_shape(radiance, h, w, 3, "radiance");
    require_shape(albedo, h, w, 3, "albedo");
    require_shape(normal, h, w, 3, "normal");
    require_shape(depth, h, w, 1, "depth");
    require_shape(world_pos, h, w, 3, "world_pos");
    require_shape(motion, h, w, 2, "motion");
    if (reference) {
        require_shape(*reference, h, w, 3, "reference");
    }
}

PixelMask::PixelMask(int h, int w, bool value)
    : height(h), width(w), bits(static_cast<std::size_t>(h) * w, value ? 1 : 0)
{
}

std::size_t PixelMask::count() const noexcept
{
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

TemporalState TemporalState::empty(int height, int width)
{
    return {Tensor(height, width, 3), Tensor(height, width, 3), Tensor(height, width, 3),
            PixelMask(height, width, false)};
}

Tensor tone_map(const Tensor& hdr, float gamma)
{
    if (!(gamma > 0.0f)) {
        throw DomainError("tone_map gamma must be positive");
    }
    Tensor out = hdr;
    const float inv_gamma = 1.0f / gamma;
    for (float& v : out.values()) {
        if (v < 0.0f) {
            throw DomainError("tone_map input must be non-negative");
        }
        v = std::pow(std::min(v, 1.0f), inv_gamma);
    }
    return out;
}

Tensor demodulate_albedo(const Tensor& radiance, const Tensor& albedo, float eps)
{
    require_same(radiance, albedo, "demodulate_albedo");
    if (!(eps > 0.0f)) {
        throw DomainError("albedo floor must be positive");
    }
    Tensor out(radiance.height(), radiance.width(), radiance.channels());
    const float* r = radiance.raw();
    const float* a = albedo.raw();
    float* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) {
        o[i] = r[i] / std::max(a[i], eps);
    }
    return out;
}

Tensor remodulate_albedo(const Tensor& irradiance, const Tensor& albedo)
{
    require_same(irradiance, albedo, "remodulate_albedo");
    Tensor out(irradiance.height(), irradiance.width(), irradiance.channels());
    const float* r = irradiance.raw();
    const float* a = albedo.raw();
    float* o = out.raw();
    for (std::size_t i = 0; i < out.size(); ++i) {
        o[i] = r[i] * a[i];
    }
    return out;
}

Reprojection reproject(const TemporalState& prev, const Tensor& motion)
{
    const int h = prev.accum_radiance.height();
    const int w = prev.accum_radiance.width();
    require_shape(motion, h, w, 2, "motion");
    Reprojection out{Tensor(h, w, 3), Tensor(h, w, 3), Tensor(h, w, 3), PixelMask(h, w, false)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float* mv = motion.pixel(y, x);
            const long sx = static_cast<long>(std::floor(static_cast<double>(x) + mv[0] + 0.5));
            const long sy = static_cast<long>(std::floor(static_cast<double>(y) + mv[1] + 0.5));
            if (sx < 0 || sy < 0 || sx >= w || sy >= h) {
                continue;
            }
            const int iy = static_cast<int>(sy);
            const int ix = static_cast<int>(sx);
            if (!prev.valid(iy, ix)) {
                continue;
            }
            std::copy_n(prev.accum_radiance.pixel(iy, ix), 3, out.radiance.pixel(y, x));
            std::copy_n(prev.prev_world_pos.pixel(iy, ix), 3, out.world_pos.pixel(y, x));
            std::copy_n(prev.prev_normal.pixel(iy, ix), 3, out.normal.pixel(y, x));
            out.in_bounds.set(y, x, true);
        }
    }
    return out;
}

PixelMask consistency_test(const Tensor& cur_pos, const Tensor& cur_normal,
                           const Tensor& warped_pos, const Tensor& warped_normal, float pos_tol,
                           float normal_tol)
{
    require_same(cur_pos, warped_pos, "consistency_test positions");
    require_same(cur_normal, warped_normal, "consistency_test normals");
    if (!cur_pos.same_extent(cur_normal)) {
        throw DimensionError("consistency_test: position and normal extents differ");
    }
    if (!(pos_tol > 0.0f) || !(normal_tol > 0.0f) || normal_tol > 1.0f) {
        throw DomainError("consistency tolerances out of range");
    }
    const int h = cur_pos.height();
    const int w = cur_pos.width();
    PixelMask mask(h, w, false);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float* a = cur_pos.pixel(y, x);
            const float* b = warped_pos.pixel(y, x);
            const double dist2 = (double(a[0]) - b[0]) * (double(a[0]) - b[0]) +
                                 (double(a[1]) - b[1]) * (double(a[1]) - b[1]) +
                                 (double(a[2]) - b[2]) * (double(a[2]) - b[2]);
            if (!(std::sqrt(dist2) < pos_tol)) {
                continue;
            }
            double n0[3];
            double n1[3];
            double len0 = 0.0;
            double len1 = 0.0;
            for (int c = 0; c < 3; ++c) {
                n0[c] = 2.0 * cur_normal.at(y, x, c) - 1.0;
                n1[c] = 2.0 * warped_normal.at(y, x, c) - 1.0;
                len0 += n0[c] * n0[c];
                len1 += n1[c] * n1[c];
            }
            if (len0 <= 0.0 || len1 <= 0.0) {
                continue;
            }
            const double dot = (n0[0] * n1[0] + n0[1] * n1[1] + n0[2] * n1[2]) /
                               (std::sqrt(len0) * std::sqrt(len1));
            mask.set(y, x, dot > normal_tol);
        }
    }
    return mask;
}

Accumulation temporal_accumulate(const Tensor& cur_radiance, const Tensor& warped_radiance,
                                 const PixelMask& mask, float blend_alpha)
{
    require_same(cur_radiance, warped_radiance, "temporal_accumulate");
    if (mask.height != cur_radiance.height() || mask.width != cur_radiance.width()) {
        throw DimensionError("temporal_accumulate: mask extent mismatch");
    }
    if (!(blend_alpha > 0.0f) || blend_alpha > 1.0f) {
        throw DomainError("blend_alpha must lie in (0, 1]");
    }
    Accumulation out{cur_radiance, mask};
    const int c = cur_radiance.channels();
    for (int y = 0; y < cur_radiance.height(); ++y) {
        for (int x = 0; x < cur_radiance.width(); ++x) {
            if (!mask(y, x)) {
                continue;
            }
            const float* cur = cur_radiance.pixel(y, x);
            const float* old = warped_radiance.pixel(y, x);
            float* o = out.radiance.pixel(y, x);
            for (int ch = 0; ch < c; ++ch) {
                o[ch] = (1.0f - blend_alpha) * old[ch] + blend_alpha * cur[ch];
            }
        }
    }
    return out;
}

Tensor TemporalAccumulator::process(const FrameBundle& frame)
{
    frame.validate();
    const int h = frame.height();
    const int w = frame.width();
    Tensor accum;
    if (!cfg_.enabled || !state_ || state_->accum_radiance.height() != h ||
        state_->accum_radiance.width() != w) {
        accum = frame.radiance;
        last_reuse_ = 0.0;
    } else {
        const Reprojection warped = reproject(*state_, frame.motion);
        PixelMask mask = consistency_test(frame.world_pos, frame.normal, warped.world_pos,
                                          warped.normal, cfg_.pos_tol, cfg_.normal_tol);
        for (std::size_t i = 0; i < mask.bits.size(); ++i) {
            mask.bits[i] = mask.bits[i] && warped.in_bounds.bits[i];
        }
        Accumulation acc = temporal_accumulate(frame.radiance, warped.radiance, mask,
                                               cfg_.blend_alpha);
        last_reuse_ = static_cast<double>(acc.effective.count()) / (static_cast<double>(h) * w);
        accum = std::move(acc.radiance);
    }
    if (cfg_.enabled) {
        state_ = TemporalState{accum, frame.world_pos, frame.normal, PixelMask(h, w, true)};
    }
    return accum;
}

Tensor pack_inputs(const FrameBundle& bundle, const Tensor& accum_radiance, float gamma)
{
    bundle.validate();
    require_shape(accum_radiance, bundle.height(), bundle.width(), 3, "accum_radiance");
    const Tensor color = tone_map(accum_radiance, gamma);
    const Tensor parts[] = {color, bundle.albedo, bundle.normal, bundle.depth};
    return concat_channels(parts);
}

} // namespace wskp
