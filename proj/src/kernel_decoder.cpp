#include "wskp/kernel_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wskp/errors.hpp"
#include "wskp/parallel.hpp"
#include "wskp/simd/kernels.hpp"

namespace wskp {

namespace {

constexpr int kBandRows = 32;

void require_odd(int k)
{
    if (k < 1 || k % 2 == 0) {
        throw ConfigError("kernel size must be odd and positive, got " + std::to_string(k));
    }
}

void require_single_channel(const Tensor& imap)
{
    if (imap.channels() != 1) {
        throw DimensionError("importance map must have one channel, got " +
                             std::to_string(imap.channels()));
    }
}

void softmax_inplace(const float* logits, int n, float* out)
{
    float m = logits[0];
    for (int i = 1; i < n; ++i) {
        m = std::max(m, logits[i]);
    }
    float sum = 0.0f;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    const float inv = 1.0f / sum;
    for (int i = 0; i < n; ++i) {
        out[i] *= inv;
    }
}

void check_streaming_inputs(const ImportanceMaps& imaps, const BlendLogits& blend,
                            const Tensor& noisy, const FusionConfig& cfg)
{
    cfg.validate_for(noisy.height(), noisy.width());
    if (noisy.channels() != 3) {
        throw DimensionError("noisy image must have 3 channels");
    }
    if (!imaps.maps.same_extent(noisy) || !blend.logits.same_extent(noisy)) {
        throw DimensionError("importance maps, blend logits and noisy image differ in extent");
    }
    if (imaps.maps.channels() != cfg.kernel_count) {
        throw ConfigError("expected " + std::to_string(cfg.kernel_count) + " importance maps, got " +
                          std::to_string(imaps.maps.channels()));
    }
    if (blend.logits.channels() != cfg.kernel_count) {
        throw ConfigError("expected " + std::to_string(cfg.kernel_count) + " blend logits, got " +
                          std::to_string(blend.logits.channels()));
    }
}

} // namespace

std::vector<int> FusionConfig::sizes() const
{
    std::vector<int> out;
    out.reserve(std::max(0, kernel_count));
    for (int i = 0; i < kernel_count; ++i) {
        out.push_back(size(i));
    }
    return out;
}

long FusionConfig::total_taps() const noexcept
{
    long taps = 0;
    for (int i = 0; i < kernel_count; ++i) {
        taps += static_cast<long>(size(i)) * size(i);
    }
    return taps;
}

void FusionConfig::validate() const
{
    if (kernel_count < 1) {
        throw ConfigError("kernel_count must be >= 1");
    }
    if (base_size < 1 || base_size % 2 == 0) {
        throw ConfigError("base kernel size must be odd and >= 1, got " + std::to_string(base_size));
    }
    if (kernel_count > 1 && (step < 2 || step % 2 != 0)) {
        throw ConfigError("kernel size step must be even and >= 2, got " + std::to_string(step));
    }
}

void FusionConfig::validate_for(int height, int width) const
{
    validate();
    if (max_size() > std::min(height, width)) {
        throw ConfigError("largest kernel " + std::to_string(max_size()) + " exceeds image " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
}

Tensor unfold_importance(const Tensor& imap, int k)
{
    require_odd(k);
    require_single_channel(imap);
    if (k > std::min(imap.height(), imap.width())) {
        throw ConfigError("window " + std::to_string(k) + " larger than importance map");
    }
    const int r = k / 2;
    const int h = imap.height();
    const int w = imap.width();
    Tensor out(h, w, k * k);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float* dst = out.pixel(y, x);
            for (int dy = -r; dy <= r; ++dy) {
                const int sy = clamp_index(y + dy, h);
                for (int dx = -r; dx <= r; ++dx) {
                    *dst++ = imap.at(sy, clamp_index(x + dx, w), 0);
                }
            }
        }
    }
    return out;
}

KernelMap construct_kernel_map(const Tensor& imap, int k)
{
    KernelMap kmap{unfold_importance(imap, k), k};
    const int taps = k * k;
    const std::size_t n = kmap.weights.pixel_count();
    float* data = kmap.weights.raw();
    for (std::size_t p = 0; p < n; ++p) {
        float* wp = data + p * taps;
        softmax_inplace(wp, taps, wp);
    }
    return kmap;
}

Tensor apply_kernel_map(const KernelMap& kmap, const Tensor& noisy)
{
    const int k = kmap.size;
    require_odd(k);
    if (!kmap.weights.same_extent(noisy) || kmap.weights.channels() != k * k) {
        throw DimensionError("kernel map does not match noisy image");
    }
    const int r = k / 2;
    const int h = noisy.height();
    const int w = noisy.width();
    const int c = noisy.channels();
    Tensor out(h, w, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float* wp = kmap.weights.pixel(y, x);
            float* o = out.pixel(y, x);
            int j = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const int sy = clamp_index(y + dy, h);
                for (int dx = -r; dx <= r; ++dx, ++j) {
                    const float* src = noisy.pixel(sy, clamp_index(x + dx, w));
                    for (int ch = 0; ch < c; ++ch) {
                        o[ch] += wp[j] * src[ch];
                    }
                }
            }
        }
    }
    return out;
}

Tensor channel_softmax(const Tensor& logits)
{
    Tensor out(logits.height(), logits.width(), logits.channels());
    const int m = logits.channels();
    if (m == 0) {
        return out;
    }
    const std::size_t n = logits.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        softmax_inplace(logits.raw() + p * m, m, out.raw() + p * m);
    }
    return out;
}

Tensor fuse(std::span<const Tensor> filtered, const BlendLogits& blend)
{
    if (filtered.empty()) {
        throw ConfigError("fuse needs at least one filtered image");
    }
    if (static_cast<int>(filtered.size()) != blend.logits.channels()) {
        throw ConfigError("fuse: " + std::to_string(filtered.size()) + " images but " +
                          std::to_string(blend.logits.channels()) + " blend logits");
    }
    for (const Tensor& f : filtered) {
        if (!f.same_shape(filtered.front()) || !f.same_extent(blend.logits)) {
            throw DimensionError("fuse: inconsistent dimensions");
        }
    }
    const Tensor alpha = channel_softmax(blend.logits);
    const int m = alpha.channels();
    const int c = filtered.front().channels();
    Tensor out(alpha.height(), alpha.width(), c);
    const std::size_t n = out.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        float* o = out.raw() + p * c;
        const float* a = alpha.raw() + p * m;
        for (int i = 0; i < m; ++i) {
            const float* src = filtered[i].raw() + p * c;
            for (int ch = 0; ch < c; ++ch) {
                o[ch] += a[i] * src[ch];
            }
        }
    }
    return out;
}

Tensor filter_fuse_streaming(const ImportanceMaps& imaps, const BlendLogits& blend,
                             const Tensor& noisy, const FusionConfig& cfg)
{
    check_streaming_inputs(imaps, blend, noisy, cfg);
    const int h = noisy.height();
    const int w = noisy.width();
    const int m = cfg.kernel_count;
    const int pad = cfg.max_size() / 2;
    std::vector<int> radii(m);
    for (int i = 0; i < m; ++i) {
        radii[i] = cfg.size(i) / 2;
    }
    const int planes = m + 3;
    const int stride = w + 2 * pad;
    const int band_span = kBandRows + 2 * pad;
    const long plane_size = static_cast<long>(band_span) * stride;
    const simd::KernelTable& kt = simd::kernels();

    Tensor out(h, w, 3);
    const int bands = (h + kBandRows - 1) / kBandRows;
    parallel_for(0, bands, [&](int band_lo, int band_hi) {
        std::vector<float> scratch(static_cast<std::size_t>(planes) * plane_size);
        std::vector<float> alpha(static_cast<std::size_t>(w) * m);
        const simd::FuseBand band{scratch.data(), plane_size, stride, pad, m, radii.data()};
        for (int b = band_lo; b < band_hi; ++b) {
            const int y0 = b * kBandRows;
            const int y1 = std::min(h, y0 + kBandRows);
            const int rows = (y1 - y0) + 2 * pad;
            for (int lr = 0; lr < rows; ++lr) {
                const int sy = clamp_index(y0 - pad + lr, h);
                const float* imp_row = imaps.maps.pixel(sy, 0);
                const float* col_row = noisy.pixel(sy, 0);
                for (int cx = 0; cx < stride; ++cx) {
                    const int sx = clamp_index(cx - pad, w);
                    const long at = static_cast<long>(lr) * stride + cx;
                    const float* ip = imp_row + static_cast<long>(sx) * m;
                    for (int i = 0; i < m; ++i) {
                        scratch[i * plane_size + at] = ip[i];
                    }
                    const float* cp = col_row + 3L * sx;
                    scratch[m * plane_size + at] = cp[0];
                    scratch[(m + 1) * plane_size + at] = cp[1];
                    scratch[(m + 2) * plane_size + at] = cp[2];
                }
            }
            for (int y = y0; y < y1; ++y) {
                const float* logits = blend.logits.pixel(y, 0);
                for (int x = 0; x < w; ++x) {
                    softmax_inplace(logits + static_cast<long>(x) * m, m,
                                    alpha.data() + static_cast<long>(x) * m);
                }
                kt.fuse_row(band, (y - y0) + pad, alpha.data(), w, out.pixel(y, 0));
            }
        }
    });
    return out;
}

FilterFuseGradients filter_fuse_backward(const Tensor& grad_out, const ImportanceMaps& imaps,
                                         const BlendLogits& blend, const Tensor& noisy,
                                         const FusionConfig& cfg)
{
    check_streaming_inputs(imaps, blend, noisy, cfg);
    if (!grad_out.same_shape(noisy)) {
        throw DimensionError("grad_out must match the filtered output");
    }
    const int h = noisy.height();
    const int w = noisy.width();
    const int m = cfg.kernel_count;
    FilterFuseGradients grads{Tensor(h, w, m), Tensor(h, w, m)};
    const int kmax = cfg.max_size();
    std::vector<float> e(static_cast<std::size_t>(kmax) * kmax);
    std::vector<int> src_index(e.size());
    std::vector<float> alpha(m);
    std::vector<float> dalpha(m);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            softmax_inplace(blend.logits.pixel(y, x), m, alpha.data());
            const float* g = grad_out.pixel(y, x);
            for (int i = 0; i < m; ++i) {
                const int r = cfg.size(i) / 2;
                int taps = 0;
                float window_max = -std::numeric_limits<float>::infinity();
                for (int dy = -r; dy <= r; ++dy) {
                    const int sy = clamp_index(y + dy, h);
                    for (int dx = -r; dx <= r; ++dx) {
                        const int q = sy * w + clamp_index(x + dx, w);
                        src_index[taps++] = q;
                        window_max = std::max(window_max, imaps.maps.raw()[static_cast<long>(q) * m + i]);
                    }
                }
                float den = 0.0f;
                float s[3] = {0.0f, 0.0f, 0.0f};
                for (int j = 0; j < taps; ++j) {
                    const long q = src_index[j];
                    e[j] = std::exp(imaps.maps.raw()[q * m + i] - window_max);
                    den += e[j];
                    const float* c = noisy.raw() + q * 3;
                    s[0] += e[j] * c[0];
                    s[1] += e[j] * c[1];
                    s[2] += e[j] * c[2];
                }
                const float inv = 1.0f / den;
                const float filtered[3] = {s[0] * inv, s[1] * inv, s[2] * inv};
                dalpha[i] = g[0] * filtered[0] + g[1] * filtered[1] + g[2] * filtered[2];
                const float gr[3] = {alpha[i] * g[0], alpha[i] * g[1], alpha[i] * g[2]};
                const float baseline = gr[0] * filtered[0] + gr[1] * filtered[1] + gr[2] * filtered[2];
                float* gi = grads.importance.raw();
                for (int j = 0; j < taps; ++j) {
                    const long q = src_index[j];
                    const float* c = noisy.raw() + q * 3;
                    const float sj = gr[0] * c[0] + gr[1] * c[1] + gr[2] * c[2];
                    gi[q * m + i] += e[j] * inv * (sj - baseline);
                }
            }
            float weighted = 0.0f;
            for (int i = 0; i < m; ++i) {
                weighted += alpha[i] * dalpha[i];
            }
            float* gb = grads.blend_logits.pixel(y, x);
            for (int i = 0; i < m; ++i) {
                gb[i] = alpha[i] * (dalpha[i] - weighted);
            }
        }
    }
    return grads;
}

Tensor combine_resolutions(const Tensor& fine, const Tensor& coarse, const Tensor& alpha)
{
    if (coarse.height() * 2 != fine.height() || coarse.width() * 2 != fine.width() ||
        coarse.channels() != fine.channels()) {
        throw DimensionError("coarse image must be exactly half the fine resolution");
    }
    if (!alpha.same_extent(fine) || alpha.channels() != 1) {
        throw DimensionError("alpha must be a single-channel map at the fine resolution");
    }
    const Tensor fine_low = downsample_2x2(fine);
    const int c = fine.channels();
    Tensor out(fine.height(), fine.width(), c);
    for (int y = 0; y < fine.height(); ++y) {
        for (int x = 0; x < fine.width(); ++x) {
            const float a = alpha.at(y, x, 0);
            const float* f = fine.pixel(y, x);
            const float* lo = fine_low.pixel(y / 2, x / 2);
            const float* co = coarse.pixel(y / 2, x / 2);
            float* o = out.pixel(y, x);
            for (int ch = 0; ch < c; ++ch) {
                // Written as f + a * (Uc - UDf): exact identity when c == D(f).
                o[ch] = f[ch] + a * (co[ch] - lo[ch]);
            }
        }
    }
    return out;
}

CombineGradients combine_resolutions_backward(const Tensor& grad_out, const Tensor& fine,
                                              const Tensor& coarse, const Tensor& alpha)
{
    if (!grad_out.same_shape(fine)) {
        throw DimensionError("grad_out must match the fine image");
    }
    const Tensor fine_low = downsample_2x2(fine);
    const int c = fine.channels();
    Tensor weighted(fine.height(), fine.width(), c);
    Tensor grad_alpha(fine.height(), fine.width(), 1);
    for (int y = 0; y < fine.height(); ++y) {
        for (int x = 0; x < fine.width(); ++x) {
            const float a = alpha.at(y, x, 0);
            const float* g = grad_out.pixel(y, x);
            const float* lo = fine_low.pixel(y / 2, x / 2);
            const float* co = coarse.pixel(y / 2, x / 2);
            float* wg = weighted.pixel(y, x);
            float ga = 0.0f;
            for (int ch = 0; ch < c; ++ch) {
                wg[ch] = a * g[ch];
                ga += g[ch] * (co[ch] - lo[ch]);
            }
            grad_alpha.at(y, x, 0) = ga;
        }
    }
    Tensor grad_coarse = upsample_nearest_backward(weighted);
    const Tensor through_low = downsample_2x2_backward(grad_coarse);
    Tensor grad_fine = grad_out;
    float* gf = grad_fine.raw();
    const float* tl = through_low.raw();
    for (std::size_t i = 0; i < grad_fine.size(); ++i) {
        gf[i] -= tl[i];
    }
    return {std::move(grad_fine), std::move(grad_coarse), std::move(grad_alpha)};
}

} // namespace wskp
