// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma
// and is only entered after a runtime CPU check, so it deliberately avoids
// inline library templates that could be merged into non-AVX2 callers.

#include <immintrin.h>

#include "wskp/simd/kernels.hpp"

namespace wskp::simd {

namespace {

inline int clamp_col(int i, int n)
{
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

// Cephes-style expf: range reduction by ln 2, degree-5 polynomial, exponent
// reconstruction. Relative error ~2 ulp over the clamped domain.
inline __m256 exp_ps(__m256 x)
{
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
    x = _mm256_max_ps(_mm256_min_ps(x, hi), lo);

    __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
    fx = _mm256_floor_ps(fx);
    x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
    x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);

    const __m256 z = _mm256_mul_ps(x, x);
    __m256 y = _mm256_set1_ps(1.9875691500e-4f);
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
    y = _mm256_fmadd_ps(y, z, x);
    y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

    __m256i e = _mm256_cvttps_epi32(fx);
    e = _mm256_add_epi32(e, _mm256_set1_epi32(127));
    e = _mm256_slli_epi32(e, 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

inline __m256i lane_mask(int count)
{
    const __m256i lanes = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    return _mm256_cmpgt_epi32(_mm256_set1_epi32(count), lanes);
}

void fuse_row_avx2(const FuseBand& band, int center_row, const float* alpha, int width,
                   float* out)
{
    const long stride = band.stride;
    const int m = band.kernel_count;
    const float* color0 = band.planes + m * band.plane_size;
    const float* color1 = color0 + band.plane_size;
    const float* color2 = color1 + band.plane_size;
    const __m256i alpha_index = _mm256_mullo_epi32(_mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7),
                                                   _mm256_set1_epi32(m));
    int x = 0;
    for (; x + 8 <= width; x += 8) {
        __m256 acc0 = _mm256_setzero_ps();
        __m256 acc1 = _mm256_setzero_ps();
        __m256 acc2 = _mm256_setzero_ps();
        for (int i = 0; i < m; ++i) {
            const int r = band.radii[i];
            const int k = 2 * r + 1;
            const float* imp = band.planes + i * band.plane_size;
            const long origin = (center_row - r) * stride + (x + band.pad - r);

            __m256 vmax = _mm256_set1_ps(-__builtin_inff());
            for (int dy = 0; dy < k; ++dy) {
                const float* u = imp + origin + dy * stride;
                for (int dx = 0; dx < k; ++dx) {
                    vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(u + dx));
                }
            }
            __m256 den = _mm256_setzero_ps();
            __m256 s0 = _mm256_setzero_ps();
            __m256 s1 = _mm256_setzero_ps();
            __m256 s2 = _mm256_setzero_ps();
            for (int dy = 0; dy < k; ++dy) {
                const long row = origin + dy * stride;
                for (int dx = 0; dx < k; ++dx) {
                    const __m256 e = exp_ps(_mm256_sub_ps(_mm256_loadu_ps(imp + row + dx), vmax));
                    den = _mm256_add_ps(den, e);
                    s0 = _mm256_fmadd_ps(e, _mm256_loadu_ps(color0 + row + dx), s0);
                    s1 = _mm256_fmadd_ps(e, _mm256_loadu_ps(color1 + row + dx), s1);
                    s2 = _mm256_fmadd_ps(e, _mm256_loadu_ps(color2 + row + dx), s2);
                }
            }
            const __m256 a = _mm256_i32gather_ps(alpha + static_cast<long>(x) * m + i,
                                                 alpha_index, 4);
            acc0 = _mm256_fmadd_ps(a, _mm256_div_ps(s0, den), acc0);
            acc1 = _mm256_fmadd_ps(a, _mm256_div_ps(s1, den), acc1);
            acc2 = _mm256_fmadd_ps(a, _mm256_div_ps(s2, den), acc2);
        }
        alignas(32) float c0[8];
        alignas(32) float c1[8];
        alignas(32) float c2[8];
        _mm256_store_ps(c0, acc0);
        _mm256_store_ps(c1, acc1);
        _mm256_store_ps(c2, acc2);
        float* dst = out + 3L * x;
        for (int l = 0; l < 8; ++l) {
            dst[3 * l] = c0[l];
            dst[3 * l + 1] = c1[l];
            dst[3 * l + 2] = c2[l];
        }
    }
    for (; x < width; ++x) {
        fuse_pixel_scalar(band, center_row, x, alpha + static_cast<long>(x) * m, out + 3L * x);
    }
}

// Accumulates NP adjacent output pixels over NC 8-wide output-channel chunks.
template <int NP, int NC>
inline void conv_forward_block(const ConvGeometry& g, const float* input, const float* packed_w,
                               const float* bias_pad, int y, int x, int chunk0, float* out_row)
{
    const int r = g.ksize / 2;
    const long tap_stride = static_cast<long>(g.in_ch) * g.out_pad;
    __m256 acc[NP][NC];
#pragma GCC unroll 4
    for (int c = 0; c < NC; ++c) {
        const __m256 b = _mm256_loadu_ps(bias_pad + 8 * (chunk0 + c));
#pragma GCC unroll 2
        for (int p = 0; p < NP; ++p) {
            acc[p][c] = b;
        }
    }
    int tap = 0;
    for (int dy = -r; dy <= r; ++dy) {
        const float* row = input + static_cast<long>(clamp_col(y + dy, g.height)) * g.width * g.in_ch;
        for (int dx = -r; dx <= r; ++dx, ++tap) {
            const float* src[NP];
#pragma GCC unroll 2
            for (int p = 0; p < NP; ++p) {
                src[p] = row + static_cast<long>(clamp_col(x + p + dx, g.width)) * g.in_ch;
            }
            const float* w = packed_w + tap * tap_stride + 8 * chunk0;
            for (int i = 0; i < g.in_ch; ++i) {
                const float* wi = w + static_cast<long>(i) * g.out_pad;
                __m256 v[NP];
#pragma GCC unroll 2
                for (int p = 0; p < NP; ++p) {
                    v[p] = _mm256_broadcast_ss(src[p] + i);
                }
#pragma GCC unroll 4
                for (int c = 0; c < NC; ++c) {
                    const __m256 wv = _mm256_loadu_ps(wi + 8 * c);
#pragma GCC unroll 2
                    for (int p = 0; p < NP; ++p) {
                        acc[p][c] = _mm256_fmadd_ps(v[p], wv, acc[p][c]);
                    }
                }
            }
        }
    }
    const int valid = g.out_ch - 8 * chunk0;
#pragma GCC unroll 2
    for (int p = 0; p < NP; ++p) {
        float* dst = out_row + static_cast<long>(x + p) * g.out_ch + 8 * chunk0;
#pragma GCC unroll 4
        for (int c = 0; c < NC; ++c) {
            const int n = valid - 8 * c;
            if (n >= 8) {
                _mm256_storeu_ps(dst + 8 * c, acc[p][c]);
            } else {
                _mm256_maskstore_ps(dst + 8 * c, lane_mask(n), acc[p][c]);
            }
        }
    }
}

template <int NP>
inline void conv_forward_pixels(const ConvGeometry& g, const float* input, const float* packed_w,
                                const float* bias_pad, int y, int x, float* out_row)
{
    const int chunks = g.out_pad / 8;
    int c = 0;
    for (; c + 4 <= chunks; c += 4) {
        conv_forward_block<NP, 4>(g, input, packed_w, bias_pad, y, x, c, out_row);
    }
    switch (chunks - c) {
    case 3: conv_forward_block<NP, 3>(g, input, packed_w, bias_pad, y, x, c, out_row); break;
    case 2: conv_forward_block<NP, 2>(g, input, packed_w, bias_pad, y, x, c, out_row); break;
    case 1: conv_forward_block<NP, 1>(g, input, packed_w, bias_pad, y, x, c, out_row); break;
    default: break;
    }
}

void conv_forward_row_avx2(const ConvGeometry& g, const float* input, const float* packed_w,
                           const float* bias_pad, int y, float* out_row)
{
    int x = 0;
    for (; x + 2 <= g.width; x += 2) {
        conv_forward_pixels<2>(g, input, packed_w, bias_pad, y, x, out_row);
    }
    for (; x < g.width; ++x) {
        conv_forward_pixels<1>(g, input, packed_w, bias_pad, y, x, out_row);
    }
}

void conv_grad_weights_row_avx2(const ConvGeometry& g, const float* input,
                                const float* grad_row, int y, float* grad_w)
{
    const int r = g.ksize / 2;
    const long tap_stride = static_cast<long>(g.in_ch) * g.out_pad;
    const int chunks = g.out_pad / 8;
    for (int x = 0; x < g.width; ++x) {
        const float* go = grad_row + static_cast<long>(x) * g.out_ch;
        for (int c0 = 0; c0 < chunks; c0 += 4) {
            const int nc = chunks - c0 < 4 ? chunks - c0 : 4;
            __m256 gv[4];
            for (int c = 0; c < nc; ++c) {
                const int n = g.out_ch - 8 * (c0 + c);
                gv[c] = n >= 8 ? _mm256_loadu_ps(go + 8 * (c0 + c))
                               : _mm256_maskload_ps(go + 8 * (c0 + c), lane_mask(n));
            }
            int tap = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const float* row =
                    input + static_cast<long>(clamp_col(y + dy, g.height)) * g.width * g.in_ch;
                for (int dx = -r; dx <= r; ++dx, ++tap) {
                    const float* src = row + static_cast<long>(clamp_col(x + dx, g.width)) * g.in_ch;
                    float* gw = grad_w + tap * tap_stride + 8 * c0;
                    for (int i = 0; i < g.in_ch; ++i) {
                        const __m256 v = _mm256_broadcast_ss(src + i);
                        float* gwi = gw + static_cast<long>(i) * g.out_pad;
                        for (int c = 0; c < nc; ++c) {
                            _mm256_storeu_ps(gwi + 8 * c,
                                             _mm256_fmadd_ps(v, gv[c], _mm256_loadu_ps(gwi + 8 * c)));
                        }
                    }
                }
            }
        }
    }
}

void conv_grad_input_row_avx2(const ConvGeometry& g, const float* packed_wt,
                              const float* grad_row, int y, float* grad_input)
{
    const int r = g.ksize / 2;
    const long tap_stride = static_cast<long>(g.out_ch) * g.in_pad;
    const int chunks = g.in_pad / 8;
    for (int x = 0; x < g.width; ++x) {
        const float* go = grad_row + static_cast<long>(x) * g.out_ch;
        int tap = 0;
        for (int dy = -r; dy <= r; ++dy) {
            const int sy = clamp_col(y + dy, g.height);
            for (int dx = -r; dx <= r; ++dx, ++tap) {
                const int sx = clamp_col(x + dx, g.width);
                float* dst = grad_input + (static_cast<long>(sy) * g.width + sx) * g.in_ch;
                const float* wt = packed_wt + tap * tap_stride;
                for (int c0 = 0; c0 < chunks; c0 += 4) {
                    const int nc = chunks - c0 < 4 ? chunks - c0 : 4;
                    __m256 acc[4] = {_mm256_setzero_ps(), _mm256_setzero_ps(),
                                     _mm256_setzero_ps(), _mm256_setzero_ps()};
                    for (int o = 0; o < g.out_ch; ++o) {
                        const __m256 gvo = _mm256_broadcast_ss(go + o);
                        const float* wo = wt + static_cast<long>(o) * g.in_pad + 8 * c0;
                        for (int c = 0; c < nc; ++c) {
                            acc[c] = _mm256_fmadd_ps(_mm256_loadu_ps(wo + 8 * c), gvo, acc[c]);
                        }
                    }
                    for (int c = 0; c < nc; ++c) {
                        float* d = dst + 8 * (c0 + c);
                        const int n = g.in_ch - 8 * (c0 + c);
                        if (n >= 8) {
                            _mm256_storeu_ps(d, _mm256_add_ps(_mm256_loadu_ps(d), acc[c]));
                        } else {
                            const __m256i mask = lane_mask(n);
                            _mm256_maskstore_ps(
                                d, mask, _mm256_add_ps(_mm256_maskload_ps(d, mask), acc[c]));
                        }
                    }
                }
            }
        }
    }
}

} // namespace

const KernelTable& avx2_kernels()
{
    static const KernelTable table{
        Isa::avx2,
        &fuse_row_avx2,
        &conv_forward_row_avx2,
        &conv_grad_weights_row_avx2,
        &conv_grad_input_row_avx2,
    };
    return table;
}

} // namespace wskp::simd
