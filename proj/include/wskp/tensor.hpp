#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wskp {

// Dense H x W x C float image, row-major with interleaved channels:
// element (y, x, c) lives at ((y * W) + x) * C + c.
class Tensor {
public:
    Tensor() = default;
    Tensor(int height, int width, int channels, float fill = 0.0f);
    Tensor(int height, int width, int channels, std::vector<float> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept
    {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

    float* pixel(int y, int x) noexcept { return data_.data() + index(y, x, 0); }
    const float* pixel(int y, int x) const noexcept { return data_.data() + index(y, x, 0); }

    float* raw() noexcept { return data_.data(); }
    const float* raw() const noexcept { return data_.data(); }
    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    bool same_extent(const Tensor& other) const noexcept
    {
        return height_ == other.height_ && width_ == other.width_;
    }
    bool same_shape(const Tensor& other) const noexcept
    {
        return same_extent(other) && channels_ == other.channels_;
    }

    // Copies channels [first, first + count) into a new tensor.
    Tensor channel_slice(int first, int count) const;
    // Copies the window [y0, y0 + h) x [x0, x0 + w) into a new tensor.
    Tensor crop(int y0, int x0, int h, int w) const;

    void fill(float value);

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept
    {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

// Concatenates tensors of equal extent along the channel axis.
Tensor concat_channels(std::span<const Tensor> parts);

// Mean of each 2x2 block, per channel. Both dimensions must be even.
Tensor downsample_2x2(const Tensor& img);

// Nearest-neighbour 2x upsampling: out(i, j) = in(i / 2, j / 2).
Tensor upsample_nearest(const Tensor& img);

// Adjoint of downsample_2x2: every source pixel receives a quarter of its
// block's gradient.
Tensor downsample_2x2_backward(const Tensor& grad_out);

// Adjoint of upsample_nearest: sums each 2x2 block.
Tensor upsample_nearest_backward(const Tensor& grad_out);

inline int clamp_index(int i, int n) noexcept
{
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

} // namespace wskp
