#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wskp/simd/kernels.hpp"
#include "wskp/tensor.hpp"

namespace wskp::simd {

void fuse_pixel_scalar(const FuseBand& band, int center_row, int x, const float* alpha,
                       float* out)
{
    const long stride = band.stride;
    const float* color0 = band.planes + band.kernel_count * band.plane_size;
    const float* color1 = color0 + band.plane_size;
    const float* color2 = color1 + band.plane_size;
    float acc[3] = {0.0f, 0.0f, 0.0f};
    for (int i = 0; i < band.kernel_count; ++i) {
        const int r = band.radii[i];
        const int k = 2 * r + 1;
        const float* imp = band.planes + i * band.plane_size;
        const long origin = (center_row - r) * stride + (x + band.pad - r);

        float window_max = -std::numeric_limits<float>::infinity();
        for (int dy = 0; dy < k; ++dy) {
            const float* u = imp + origin + dy * stride;
            for (int dx = 0; dx < k; ++dx) {
                window_max = std::max(window_max, u[dx]);
            }
        }
        float den = 0.0f;
        float s0 = 0.0f;
        float s1 = 0.0f;
        float s2 = 0.0f;
        for (int dy = 0; dy < k; ++dy) {
            const long row = origin + dy * stride;
            for (int dx = 0; dx < k; ++dx) {
                const float e = std::exp(imp[row + dx] - window_max);
                den += e;
                s0 += e * color0[row + dx];
                s1 += e * color1[row + dx];
                s2 += e * color2[row + dx];
            }
        }
        const float a = alpha[i];
        acc[0] += a * (s0 / den);
        acc[1] += a * (s1 / den);
        acc[2] += a * (s2 / den);
    }
    out[0] = acc[0];
    out[1] = acc[1];
    out[2] = acc[2];
}

namespace {

void fuse_row_scalar(const FuseBand& band, int center_row, const float* alpha, int width,
                     float* out)
{
    for (int x = 0; x < width; ++x) {
        fuse_pixel_scalar(band, center_row, x, alpha + static_cast<long>(x) * band.kernel_count,
                          out + 3L * x);
    }
}

void conv_forward_row_scalar(const ConvGeometry& g, const float* input, const float* packed_w,
                             const float* bias_pad, int y, float* out_row)
{
    const int r = g.ksize / 2;
    const long tap_stride = static_cast<long>(g.in_ch) * g.out_pad;
    std::vector<float> acc(g.out_pad);
    for (int x = 0; x < g.width; ++x) {
        std::copy(bias_pad, bias_pad + g.out_pad, acc.begin());
        int tap = 0;
        for (int dy = -r; dy <= r; ++dy) {
            const int sy = clamp_index(y + dy, g.height);
            for (int dx = -r; dx <= r; ++dx, ++tap) {
                const int sx = clamp_index(x + dx, g.width);
                const float* src = input + (static_cast<long>(sy) * g.width + sx) * g.in_ch;
                const float* w = packed_w + tap * tap_stride;
                for (int i = 0; i < g.in_ch; ++i) {
                    const float v = src[i];
                    const float* wi = w + static_cast<long>(i) * g.out_pad;
                    for (int o = 0; o < g.out_ch; ++o) {
                        acc[o] += v * wi[o];
                    }
                }
            }
        }
        std::copy(acc.begin(), acc.begin() + g.out_ch, out_row + static_cast<long>(x) * g.out_ch);
    }
}

void conv_grad_weights_row_scalar(const ConvGeometry& g, const float* input,
                                  const float* grad_row, int y, float* grad_w)
{
    const int r = g.ksize / 2;
    const long tap_stride = static_cast<long>(g.in_ch) * g.out_pad;
    for (int x = 0; x < g.width; ++x) {
        const float* go = grad_row + static_cast<long>(x) * g.out_ch;
        int tap = 0;
        for (int dy = -r; dy <= r; ++dy) {
            const int sy = clamp_index(y + dy, g.height);
            for (int dx = -r; dx <= r; ++dx, ++tap) {
                const int sx = clamp_index(x + dx, g.width);
                const float* src = input + (static_cast<long>(sy) * g.width + sx) * g.in_ch;
                float* gw = grad_w + tap * tap_stride;
                for (int i = 0; i < g.in_ch; ++i) {
                    const float v = src[i];
                    float* gwi = gw + static_cast<long>(i) * g.out_pad;
                    for (int o = 0; o < g.out_ch; ++o) {
                        gwi[o] += v * go[o];
                    }
                }
            }
        }
    }
}

void conv_grad_input_row_scalar(const ConvGeometry& g, const float* packed_wt,
                                const float* grad_row, int y, float* grad_input)
{
    const int r = g.ksize / 2;
    const long tap_stride = static_cast<long>(g.out_ch) * g.in_pad;
    for (int x = 0; x < g.width; ++x) {
        const float* go = grad_row + static_cast<long>(x) * g.out_ch;
        int tap = 0;
        for (int dy = -r; dy <= r; ++dy) {
            const int sy = clamp_index(y + dy, g.height);
            for (int dx = -r; dx <= r; ++dx, ++tap) {
                const int sx = clamp_index(x + dx, g.width);
                float* dst = grad_input + (static_cast<long>(sy) * g.width + sx) * g.in_ch;
                const float* wt = packed_wt + tap * tap_stride;
                for (int i = 0; i < g.in_ch; ++i) {
                    float s = 0.0f;
                    for (int o = 0; o < g.out_ch; ++o) {
                        s += wt[static_cast<long>(o) * g.in_pad + i] * go[o];
                    }
                    dst[i] += s;
                }
            }
        }
    }
}

} // namespace

const KernelTable& scalar_kernels()
{
    static const KernelTable table{
        Isa::scalar,
        &fuse_row_scalar,
        &conv_forward_row_scalar,
        &conv_grad_weights_row_scalar,
        &conv_grad_input_row_scalar,
    };
    return table;
}

} // namespace wskp::simd
