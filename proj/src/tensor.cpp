#include "wskp/tensor.hpp"

#include <algorithm>
#include <string>

#include "wskp/errors.hpp"

namespace wskp {

namespace {

std::size_t element_count(int height, int width, int channels)
{
    if (height < 0 || width < 0 || channels < 0) {
        throw DimensionError("negative tensor dimension");
    }
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
}

} // namespace

Tensor::Tensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels),
      data_(element_count(height, width, channels), fill)
{
}

Tensor::Tensor(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data))
{
    if (data_.size() != element_count(height, width, channels)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(height) + "x" +
                             std::to_string(width) + "x" + std::to_string(channels));
    }
}

Tensor Tensor::channel_slice(int first, int count) const
{
    if (first < 0 || count < 0 || first + count > channels_) {
        throw DimensionError("channel slice out of range");
    }
    Tensor out(height_, width_, count);
    const std::size_t n = pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        const float* src = data_.data() + p * channels_ + first;
        std::copy(src, src + count, out.data_.data() + p * count);
    }
    return out;
}

Tensor Tensor::crop(int y0, int x0, int h, int w) const
{
    if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > height_ || x0 + w > width_) {
        throw DimensionError("crop window out of range");
    }
    Tensor out(h, w, channels_);
    for (int y = 0; y < h; ++y) {
        const float* src = pixel(y0 + y, x0);
        std::copy(src, src + static_cast<std::size_t>(w) * channels_, out.pixel(y, 0));
    }
    return out;
}

void Tensor::fill(float value)
{
    std::fill(data_.begin(), data_.end(), value);
}

Tensor concat_channels(std::span<const Tensor> parts)
{
    if (parts.empty()) {
        return {};
    }
    int total = 0;
    for (const Tensor& t : parts) {
        if (!t.same_extent(parts.front())) {
            throw DimensionError("concat_channels: extent mismatch");
        }
        total += t.channels();
    }
    Tensor out(parts.front().height(), parts.front().width(), total);
    const std::size_t n = out.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        float* dst = out.raw() + p * total;
        for (const Tensor& t : parts) {
            const float* src = t.raw() + p * t.channels();
            dst = std::copy(src, src + t.channels(), dst);
        }
    }
    return out;
}

Tensor downsample_2x2(const Tensor& img)
{
    if (img.height() % 2 != 0 || img.width() % 2 != 0) {
        throw DimensionError("downsample_2x2 needs even dimensions, got " +
                             std::to_string(img.height()) + "x" + std::to_string(img.width()));
    }
    const int c = img.channels();
    Tensor out(img.height() / 2, img.width() / 2, c);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const float* a = img.pixel(2 * y, 2 * x);
            const float* b = img.pixel(2 * y, 2 * x + 1);
            const float* d = img.pixel(2 * y + 1, 2 * x);
            const float* e = img.pixel(2 * y + 1, 2 * x + 1);
            float* o = out.pixel(y, x);
            for (int k = 0; k < c; ++k) {
                o[k] = ((a[k] + b[k]) + (d[k] + e[k])) * 0.25f;
            }
        }
    }
    return out;
}

Tensor upsample_nearest(const Tensor& img)
{
    const int c = img.channels();
    Tensor out(img.height() * 2, img.width() * 2, c);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const float* src = img.pixel(y / 2, x / 2);
            std::copy(src, src + c, out.pixel(y, x));
        }
    }
    return out;
}

Tensor downsample_2x2_backward(const Tensor& grad_out)
{
    const int c = grad_out.channels();
    Tensor out(grad_out.height() * 2, grad_out.width() * 2, c);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const float* g = grad_out.pixel(y / 2, x / 2);
            float* o = out.pixel(y, x);
            for (int k = 0; k < c; ++k) {
                o[k] = g[k] * 0.25f;
            }
        }
    }
    return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out)
{
    if (grad_out.height() % 2 != 0 || grad_out.width() % 2 != 0) {
        throw DimensionError("upsample_nearest_backward needs even dimensions");
    }
    const int c = grad_out.channels();
    Tensor out(grad_out.height() / 2, grad_out.width() / 2, c);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const float* a = grad_out.pixel(2 * y, 2 * x);
            const float* b = grad_out.pixel(2 * y, 2 * x + 1);
            const float* d = grad_out.pixel(2 * y + 1, 2 * x);
            const float* e = grad_out.pixel(2 * y + 1, 2 * x + 1);
            float* o = out.pixel(y, x);
            for (int k = 0; k < c; ++k) {
                o[k] = (a[k] + b[k]) + (d[k] + e[k]);
            }
        }
    }
    return out;
}

} // namespace wskp
