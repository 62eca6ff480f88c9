#include <doctest.h>

#include "test_support.hpp"
#include "wskp/errors.hpp"
#include "wskp/kernel_decoder.hpp"
#include "wskp/network.hpp"
#include "wskp/simd/kernels.hpp"

using namespace wskp;
using wskp::testing::max_abs_diff;
using wskp::testing::Random;

namespace {

struct IsaGuard {
    simd::Isa saved = simd::active_isa();
    ~IsaGuard() { simd::set_active_isa(saved); }
};

ConvParams random_conv(Random& rng, int out_ch, int in_ch, int k)
{
    ConvParams p = ConvParams::zeros(out_ch, in_ch, k);
    for (float& v : p.kernel) {
        v = rng.uniform(-0.5f, 0.5f);
    }
    for (float& v : p.bias) {
        v = rng.uniform(-0.5f, 0.5f);
    }
    return p;
}

double scale_of(const Tensor& t)
{
    double m = 1.0;
    for (float v : t.values()) {
        m = std::max(m, static_cast<double>(std::abs(v)));
    }
    return m;
}

} // namespace

TEST_CASE("isa selection")
{
    IsaGuard guard;
    CHECK_NOTHROW(simd::set_active_isa(simd::Isa::scalar));
    CHECK(simd::active_isa() == simd::Isa::scalar);
    CHECK(simd::kernels().isa == simd::Isa::scalar);
    if (simd::detected_isa() != simd::Isa::avx2) {
        CHECK_THROWS_AS(simd::set_active_isa(simd::Isa::avx2), ConfigError);
    }
}

TEST_CASE("avx2 kernels match the scalar reference")
{
    if (simd::detected_isa() != simd::Isa::avx2) {
        MESSAGE("AVX2 not available on this CPU; equivalence test skipped");
        return;
    }
    IsaGuard guard;
    Random rng(21);

    SUBCASE("streaming filter")
    {
        for (int trial = 0; trial < 6; ++trial) {
            const int m = rng.integer(1, 6);
            const FusionConfig cfg{m, 3, 2};
            const int h = rng.integer(cfg.max_size(), 70);
            const int w = rng.integer(cfg.max_size(), 70);
            const ImportanceMaps im{rng.tensor(h, w, m, -4.0f, 4.0f)};
            const BlendLogits bl{rng.tensor(h, w, m, -2.0f, 2.0f)};
            const Tensor noisy = rng.tensor(h, w, 3, 0.0f, 8.0f);
            simd::set_active_isa(simd::Isa::scalar);
            const Tensor a = filter_fuse_streaming(im, bl, noisy, cfg);
            simd::set_active_isa(simd::Isa::avx2);
            const Tensor b = filter_fuse_streaming(im, bl, noisy, cfg);
            CHECK(max_abs_diff(a, b) <= 1e-5 * scale_of(a));
        }
    }

    SUBCASE("convolution forward and backward")
    {
        const int shapes[][3] = {{10, 16, 5}, {16, 16, 3}, {16, 12, 3}, {3, 5, 1}, {32, 32, 5}, {7, 9, 5}};
        for (const auto& s : shapes) {
            const ConvParams p = random_conv(rng, s[1], s[0], s[2]);
            const int h = rng.integer(3, 19);
            const int w = rng.integer(3, 23);
            const Tensor in = rng.tensor(h, w, s[0]);
            const Tensor go = rng.tensor(h, w, s[1]);
            simd::set_active_isa(simd::Isa::scalar);
            const Tensor fa = conv2d(in, p);
            const ConvGradients ga = conv2d_backward(go, in, p, true);
            simd::set_active_isa(simd::Isa::avx2);
            const Tensor fb = conv2d(in, p);
            const ConvGradients gb = conv2d_backward(go, in, p, true);
            CHECK(max_abs_diff(fa, fb) <= 1e-5 * scale_of(fa));
            CHECK(max_abs_diff(ga.input, gb.input) <= 1e-5 * scale_of(ga.input));
            const Tensor ka(1, 1, static_cast<int>(ga.params.kernel.size()), ga.params.kernel);
            const Tensor kb(1, 1, static_cast<int>(gb.params.kernel.size()), gb.params.kernel);
            CHECK(max_abs_diff(ka, kb) <= 1e-5 * scale_of(ka));
            CHECK(ga.params.bias == gb.params.bias);
        }
    }
}
