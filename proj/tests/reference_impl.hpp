#pragma once

// Straightforward float64 re-implementations of the forward maps, used as
// finite-difference oracles. They share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "wskp/network.hpp"

namespace wskp::reference {

// Optional record of which side of every ReLU / |.| kink each evaluation
// landed on, for excluding finite differences that straddle a kink.
inline std::vector<bool>* kink_pattern = nullptr;

inline void note_side(double v)
{
    if (kink_pattern) {
        kink_pattern->push_back(v > 0.0);
    }
}

struct DTensor {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> v;

    DTensor() = default;
    DTensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}
    explicit DTensor(const Tensor& t) : DTensor(t.height(), t.width(), t.channels())
    {
        std::copy(t.raw(), t.raw() + t.size(), v.begin());
    }
    double& at(int y, int x, int k) { return v[(static_cast<std::size_t>(y) * w + x) * c + k]; }
    double at(int y, int x, int k) const { return v[(static_cast<std::size_t>(y) * w + x) * c + k]; }
    double clamped(int y, int x, int k) const
    {
        return at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1), k);
    }
};

inline DTensor channels(const DTensor& t, int first, int count)
{
    DTensor out(t.h, t.w, count);
    for (int y = 0; y < t.h; ++y) {
        for (int x = 0; x < t.w; ++x) {
            for (int k = 0; k < count; ++k) {
                out.at(y, x, k) = t.at(y, x, first + k);
            }
        }
    }
    return out;
}

inline DTensor conv(const DTensor& in, const ConvParams& p)
{
    const int r = p.ksize / 2;
    DTensor out(in.h, in.w, p.out_ch);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            for (int o = 0; o < p.out_ch; ++o) {
                double s = p.bias[o];
                for (int i = 0; i < p.in_ch; ++i) {
                    for (int ky = 0; ky < p.ksize; ++ky) {
                        for (int kx = 0; kx < p.ksize; ++kx) {
                            s += p.weight(o, i, ky, kx) * in.clamped(y + ky - r, x + kx - r, i);
                        }
                    }
                }
                out.at(y, x, o) = s;
            }
        }
    }
    return out;
}

inline DTensor block(const DTensor& in, const RepVggBlockParams& b)
{
    DTensor out;
    if (b.has_branches) {
        out = conv(in, b.conv1x1);
        const DTensor b3 = conv(in, b.conv3x3);
        const DTensor b5 = conv(in, b.conv5x5);
        for (std::size_t i = 0; i < out.v.size(); ++i) {
            out.v[i] += b3.v[i] + b5.v[i] + (b.use_identity ? in.v[i] : 0.0);
        }
    } else {
        out = conv(in, *b.fused);
    }
    for (double& x : out.v) {
        note_side(x);
        x = std::max(x, 0.0);
    }
    return out;
}

inline DTensor head(const DTensor& packed, const NetworkParams& p)
{
    DTensor x = packed;
    for (const RepVggBlockParams& b : p.blocks) {
        x = block(x, b);
    }
    return conv(x, p.head);
}

// Direct evaluation: softmax of the neighbours' importance over
// each window, filtering, softmax blend.
inline DTensor filter_fuse(const DTensor& imaps, const DTensor& blend, const DTensor& noisy, const FusionConfig& cfg)
{
    DTensor out(noisy.h, noisy.w, 3);
    const int m = cfg.kernel_count;
    for (int y = 0; y < noisy.h; ++y) {
        for (int x = 0; x < noisy.w; ++x) {
            double amax = -1e300;
            for (int i = 0; i < m; ++i) {
                amax = std::max(amax, blend.at(y, x, i));
            }
            double aden = 0.0;
            for (int i = 0; i < m; ++i) {
                aden += std::exp(blend.at(y, x, i) - amax);
            }
            for (int i = 0; i < m; ++i) {
                const double alpha = std::exp(blend.at(y, x, i) - amax) / aden;
                const int r = cfg.size(i) / 2;
                double den = 0.0;
                double s[3] = {0, 0, 0};
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const double e = std::exp(imaps.clamped(y + dy, x + dx, i));
                        den += e;
                        for (int c = 0; c < 3; ++c) {
                            s[c] += e * noisy.clamped(y + dy, x + dx, c);
                        }
                    }
                }
                for (int c = 0; c < 3; ++c) {
                    out.at(y, x, c) += alpha * s[c] / den;
                }
            }
        }
    }
    return out;
}

inline DTensor down(const DTensor& t)
{
    DTensor out(t.h / 2, t.w / 2, t.c);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            for (int k = 0; k < t.c; ++k) {
                out.at(y, x, k) = 0.25 * (t.at(2 * y, 2 * x, k) + t.at(2 * y, 2 * x + 1, k) +
                                          t.at(2 * y + 1, 2 * x, k) + t.at(2 * y + 1, 2 * x + 1, k));
            }
        }
    }
    return out;
}

inline DTensor down_times(DTensor t, int n)
{
    for (int i = 0; i < n; ++i) {
        t = down(t);
    }
    return t;
}

inline DTensor reconstruct(const DTensor& head, const DTensor& noisy, const NetworkConfig& cfg)
{
    const int m = cfg.fusion.kernel_count;
    if (cfg.arch == Architecture::plain) {
        return filter_fuse(channels(head, 0, m), channels(head, m, m), noisy, cfg.fusion);
    }
    const int levels = cfg.levels();
    std::vector<DTensor> filtered;
    for (int l = 0; l < levels; ++l) {
        filtered.push_back(filter_fuse(down_times(channels(head, l * 2 * m, m), l),
                                       down_times(channels(head, l * 2 * m + m, m), l), down_times(noisy, l),
                                       cfg.fusion));
    }
    DTensor o = filtered[levels - 1];
    for (int l = levels - 2; l >= 0; --l) {
        const DTensor a = down_times(channels(head, levels * 2 * m + l, 1), l);
        const DTensor& f = filtered[l];
        const DTensor df = down(f);
        DTensor next(f.h, f.w, f.c);
        for (int y = 0; y < f.h; ++y) {
            for (int x = 0; x < f.w; ++x) {
                const double alpha = 1.0 / (1.0 + std::exp(-a.at(y, x, 0)));
                for (int k = 0; k < f.c; ++k) {
                    next.at(y, x, k) =
                        f.at(y, x, k) - alpha * df.at(y / 2, x / 2, k) + alpha * o.at(y / 2, x / 2, k);
                }
            }
        }
        o = next;
    }
    return o;
}

inline double smape(const DTensor& r, const DTensor& t, double eps = 0.01)
{
    double s = 0.0;
    for (std::size_t i = 0; i < r.v.size(); ++i) {
        note_side(r.v[i] - t.v[i]);
        note_side(r.v[i]);
        s += std::abs(r.v[i] - t.v[i]) / (std::abs(r.v[i]) + std::abs(t.v[i]) + eps);
    }
    return s / static_cast<double>(r.v.size());
}

inline double dot(const DTensor& a, const Tensor& w)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        s += a.v[i] * w.raw()[i];
    }
    return s;
}

} // namespace wskp::reference
