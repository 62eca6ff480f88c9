#include <doctest.h>

#include <cmath>
#include <vector>

#include "reference_impl.hpp"
#include "test_support.hpp"
#include "wskp/errors.hpp"
#include "wskp/network.hpp"

using namespace wskp;
using wskp::testing::max_abs_diff;
using wskp::testing::Random;

namespace {

ConvParams random_conv(Random& rng, int out_ch, int in_ch, int k, float scale = 0.5f)
{
    ConvParams p = ConvParams::zeros(out_ch, in_ch, k);
    for (float& v : p.kernel) {
        v = rng.uniform(-scale, scale);
    }
    for (float& v : p.bias) {
        v = rng.uniform(-scale, scale);
    }
    return p;
}

RepVggBlockParams random_block(Random& rng, int in_ch, int out_ch, bool identity)
{
    RepVggBlockParams b;
    b.conv1x1 = random_conv(rng, out_ch, in_ch, 1);
    b.conv3x3 = random_conv(rng, out_ch, in_ch, 3, 0.2f);
    b.conv5x5 = random_conv(rng, out_ch, in_ch, 5, 0.1f);
    b.use_identity = identity;
    return b;
}

Tensor conv_oracle(const Tensor& in, const ConvParams& p)
{
    const int h = in.height();
    const int w = in.width();
    const int r = p.ksize / 2;
    Tensor out(h, w, p.out_ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int o = 0; o < p.out_ch; ++o) {
                double s = p.bias[o];
                for (int i = 0; i < p.in_ch; ++i) {
                    for (int ky = 0; ky < p.ksize; ++ky) {
                        for (int kx = 0; kx < p.ksize; ++kx) {
                            s += static_cast<double>(p.weight(o, i, ky, kx)) *
                                 in.at(clamp_index(y + ky - r, h), clamp_index(x + kx - r, w), i);
                        }
                    }
                }
                out.at(y, x, o) = static_cast<float>(s);
            }
        }
    }
    return out;
}

std::vector<float> flatten(const NetworkParams& p)
{
    std::vector<float> out;
    for_each_parameter(p, [&](std::span<const float> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

NetworkConfig toy_config(int blocks, int width)
{
    NetworkConfig cfg;
    cfg.widths.assign(blocks, width);
    cfg.fusion = FusionConfig{2, 3, 2};
    return cfg;
}

} // namespace

TEST_CASE("conv2d examples and oracle")
{
    ConvParams id = ConvParams::zeros(1, 1, 1);
    id.kernel[0] = 1.0f;
    Random rng(1);
    const Tensor img = rng.tensor(5, 6, 1);
    CHECK(conv2d(img, id) == img);

    ConvParams box = ConvParams::zeros(1, 1, 3);
    for (float& v : box.kernel) {
        v = 1.0f / 9.0f;
    }
    for (float v : conv2d(Tensor(5, 5, 1, 0.3f), box).values()) {
        CHECK(v == doctest::Approx(0.3f).epsilon(1e-6));
    }

    for (int trial = 0; trial < 8; ++trial) {
        const int k = 2 * rng.integer(0, 2) + 1;
        const ConvParams p = random_conv(rng, rng.integer(1, 13), rng.integer(1, 11), k);
        const Tensor in = rng.tensor(rng.integer(1, 12), rng.integer(1, 12), p.in_ch);
        CHECK(max_abs_diff(conv2d(in, p), conv_oracle(in, p)) <= 1e-5);
    }
    CHECK_THROWS_AS(conv2d(Tensor(4, 4, 2), id), DimensionError);
}

TEST_CASE("conv2d_backward")
{
    Random rng(2);
    ConvParams p = random_conv(rng, 4, 3, 3);
    Tensor in = rng.tensor(6, 6, 3);
    const Tensor probe = rng.tensor(6, 6, 4);
    const ConvGradients g = conv2d_backward(probe, in, p, true);
    for (int o = 0; o < 4; ++o) {
        double s = 0.0;
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                s += probe.at(y, x, o);
            }
        }
        CHECK(g.params.bias[o] == doctest::Approx(s).epsilon(1e-5));
    }
    auto f = [&]() { return testing::dot(conv2d(in, p), probe); };
    CHECK(testing::relative_error(g.input.values(), testing::numeric_gradient(in.values(), f)) <= 1e-3);
    CHECK(testing::relative_error(g.params.kernel, testing::numeric_gradient(p.kernel, f)) <= 1e-3);
    CHECK(testing::relative_error(g.params.bias, testing::numeric_gradient(p.bias, f)) <= 1e-3);

    const ConvGradients z = conv2d_backward(Tensor(6, 6, 4), in, p, true);
    CHECK(z.input == Tensor(6, 6, 3));
    for (float v : z.params.kernel) {
        CHECK(v == 0.0f);
    }
    CHECK(conv2d_backward(probe, in, p, false).input.empty());
}

TEST_CASE("repvgg block examples")
{
    Random rng(3);
    const Tensor x = rng.tensor(6, 6, 4);
    RepVggBlockParams zero;
    zero.conv1x1 = ConvParams::zeros(4, 4, 1);
    zero.conv3x3 = ConvParams::zeros(4, 4, 3);
    zero.conv5x5 = ConvParams::zeros(4, 4, 5);
    zero.use_identity = true;
    Tensor relu_x = x;
    relu_inplace(relu_x);
    CHECK(repvgg_forward(x, zero, BlockMode::multi_branch) == relu_x);

    zero.use_identity = false;
    zero.conv3x3.bias.assign(4, 0.5f);
    zero.conv1x1.bias = {-1.0f, 0.0f, 0.25f, 0.0f};
    const Tensor c = repvgg_forward(x, zero, BlockMode::multi_branch);
    CHECK(c.at(3, 2, 0) == 0.0f);
    CHECK(c.at(1, 4, 2) == doctest::Approx(0.75f));

    CHECK_THROWS_AS(repvgg_forward(x, zero, BlockMode::fused), StateError);
    RepVggBlockParams bad = random_block(rng, 3, 4, true);
    CHECK_THROWS_AS(reparameterize(bad), ConfigError);
}

TEST_CASE("reparameterize examples")
{
    RepVggBlockParams b;
    b.conv1x1 = ConvParams::zeros(3, 3, 1);
    b.conv3x3 = ConvParams::zeros(3, 3, 3);
    b.conv5x5 = ConvParams::zeros(3, 3, 5);
    b.use_identity = true;
    const ConvParams dirac = reparameterize(b);
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 3; ++i) {
            for (int ky = 0; ky < 5; ++ky) {
                for (int kx = 0; kx < 5; ++kx) {
                    CHECK(dirac.weight(o, i, ky, kx) == ((o == i && ky == 2 && kx == 2) ? 1.0f : 0.0f));
                }
            }
        }
    }
    b.use_identity = false;
    b.conv1x1.weight(1, 2, 0, 0) = 0.7f;
    const ConvParams one = reparameterize(b);
    CHECK(one.weight(1, 2, 2, 2) == 0.7f);
    double total = 0.0;
    for (float v : one.kernel) {
        total += std::abs(v);
    }
    CHECK(total == doctest::Approx(0.7));
}

TEST_CASE("fused and multi-branch blocks agree")
{
    Random rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const int in_ch = rng.integer(1, 8);
        const bool same = rng.uniform() < 0.5;
        const int out_ch = same ? in_ch : rng.integer(1, 8);
        RepVggBlockParams b = random_block(rng, in_ch, out_ch, same);
        const Tensor x = rng.tensor(rng.integer(2, 10), rng.integer(2, 10), in_ch);
        const Tensor multi = repvgg_forward(x, b, BlockMode::multi_branch);
        const RepVggBlockParams fused = fuse_block(b);
        REQUIRE(max_abs_diff(multi, repvgg_forward(x, fused, BlockMode::fused)) <= 1e-5);
        REQUIRE(reparameterize(fused).kernel == fused.fused->kernel);
    }
}

TEST_CASE("network structure")
{
    const NetworkConfig six = six_layer_config();
    const NetworkParams p = init_network(six, 1);
    const std::size_t block0 = 32 * 10 * (1 + 9 + 25) + 3 * 32;
    const std::size_t block = 32 * 32 * (1 + 9 + 25) + 3 * 32;
    const std::size_t head = 12 * 32 * 9 + 12;
    CHECK(p.parameter_count() == block0 + 5 * block + head);
    CHECK(p.blocks[0].use_identity == false);
    CHECK(p.blocks[1].use_identity == true);
    CHECK(p.head.out_ch == 12);
    CHECK(three_layer_config().widths.size() == 3);
    CHECK(multires_config().head_channels() == 3 * 4 + 2);

    const float bound = 1.0f / std::sqrt(10.0f * 25.0f);
    for (float v : p.blocks[0].conv5x5.kernel) {
        REQUIRE(std::abs(v) <= bound);
    }
    CHECK(flatten(init_network(six, 1)) == flatten(p));
    CHECK(flatten(init_network(six, 2)) != flatten(p));
    const std::vector<float> z = flatten(zeros_like(p));
    CHECK(z.size() == p.parameter_count());
    CHECK(std::all_of(z.begin(), z.end(), [](float v) { return v == 0.0f; }));

    const NetworkParams fused = reparameterize_network(p);
    CHECK(fused.fully_fused());
    CHECK(reparameterize_network(fused).fully_fused());
    CHECK(flatten(reparameterize_network(fused)) == flatten(fused));
}

TEST_CASE("importance net forward")
{
    Random rng(5);
    NetworkParams p = init_network(six_layer_config(8), 3);
    const Tensor packed = rng.tensor(10, 12, 10, 0.0f, 1.0f);
    const ImportanceOutputs out = importance_net_forward(packed, p, BlockMode::multi_branch);
    CHECK(out.importance.maps.channels() == 6);
    CHECK(out.blend.logits.channels() == 6);
    CHECK(out.importance.maps.height() == 10);
    CHECK(out.blend.logits.width() == 12);

    const NetworkParams fused = reparameterize_network(p);
    CHECK(max_abs_diff(network_head(packed, p, BlockMode::multi_branch), network_head(packed, fused, BlockMode::fused)) <=
          1e-5);
    CHECK_THROWS_AS(network_head(packed, p, BlockMode::fused), StateError);

    std::fill(p.head.kernel.begin(), p.head.kernel.end(), 0.0f);
    std::fill(p.head.bias.begin(), p.head.bias.end(), 0.0f);
    const ImportanceOutputs zero = importance_net_forward(packed, p, BlockMode::multi_branch);
    const Tensor alpha = channel_softmax(zero.blend.logits);
    for (float v : alpha.values()) {
        CHECK(v == doctest::Approx(1.0 / 6.0));
    }

    // zero head: every kernel is a box filter and the blend is uniform
    const Tensor noisy = rng.tensor(16, 16, 3, 0.0f, 2.0f);
    const Tensor head = network_head(rng.tensor(16, 16, 10, 0.0f, 1.0f), p, BlockMode::multi_branch);
    const Tensor out_img = reconstruct(head, noisy, p.config);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            for (int c = 0; c < 3; ++c) {
                double fused_value = 0.0;
                for (int k = 3; k <= 13; k += 2) {
                    const int r = k / 2;
                    double s = 0.0;
                    for (int dy = -r; dy <= r; ++dy) {
                        for (int dx = -r; dx <= r; ++dx) {
                            s += noisy.at(clamp_index(y + dy, 16), clamp_index(x + dx, 16), c);
                        }
                    }
                    fused_value += s / (k * k) / 6.0;
                }
                REQUIRE(std::abs(out_img.at(y, x, c) - fused_value) <= 1e-5);
            }
        }
    }
    NetworkParams wrong = init_network(six_layer_config(8), 3);
    wrong.config.fusion.kernel_count = 5;
    CHECK_THROWS_AS(importance_net_forward(packed, wrong, BlockMode::multi_branch), ConfigError);
}

TEST_CASE("network backward matches finite differences")
{
    Random rng(6);
    NetworkParams p = init_network(toy_config(3, 4), 11);
    const Tensor packed = rng.tensor(8, 8, 10, 0.0f, 1.0f);
    const Tensor noisy = rng.tensor(8, 8, 3, 0.1f, 2.0f);
    const Tensor target = rng.tensor(8, 8, 3, 0.1f, 2.0f);
    const Tensor probe = rng.tensor(8, 8, p.config.head_channels());

    SUBCASE("head jacobian")
    {
        NetworkParams grads = zeros_like(p);
        const NetworkTrace trace = network_forward_trace(packed, p);
        CHECK(max_abs_diff(trace.head, network_head(packed, p, BlockMode::multi_branch)) <= 1e-5);
        network_backward(trace, probe, p, grads);
        const std::vector<float> analytic = flatten(grads);
        std::vector<double> numeric;
        for_each_parameter(p, [&](std::span<float> s) {
            const std::vector<double> g = testing::numeric_gradient(
                s, [&]() { return reference::dot(reference::head(reference::DTensor(packed), p), probe); });
            numeric.insert(numeric.end(), g.begin(), g.end());
        });
        CHECK(testing::relative_error(analytic, numeric) <= 1e-3);
    }

    SUBCASE("loss through reconstruction")
    {
        const reference::DTensor dp(packed);
        const reference::DTensor dn(noisy);
        const reference::DTensor dr(target);
        auto loss = [&]() {
            return reference::smape(reference::reconstruct(reference::head(dp, p), dn, p.config), dr);
        };
        NetworkParams grads = zeros_like(p);
        const NetworkTrace trace = network_forward_trace(packed, p);
        const LossResult l = smape_loss(reconstruct(trace.head, noisy, p.config), target);
        network_backward(trace, reconstruct_backward(l.grad, trace.head, noisy, p.config), p, grads);
        std::vector<double> numeric;
        for_each_parameter(p, [&](std::span<float> s) {
            const std::vector<double> g = testing::numeric_gradient(s, loss);
            numeric.insert(numeric.end(), g.begin(), g.end());
        });
        CHECK(testing::relative_error(flatten(grads), numeric) <= 1e-3);
    }
}

TEST_CASE("multires reconstruction gradient")
{
    Random rng(7);
    NetworkConfig cfg = multires_config(4);
    Tensor head = rng.tensor(20, 20, cfg.head_channels(), -1.0f, 1.0f);
    const Tensor noisy = rng.tensor(20, 20, 3, 0.1f, 2.0f);
    const Tensor probe = rng.tensor(20, 20, 3);
    const Tensor g = reconstruct_backward(probe, head, noisy, cfg);
    const std::vector<double> n =
        testing::numeric_gradient(head.values(), [&]() {
            return reference::dot(reference::reconstruct(reference::DTensor(head), reference::DTensor(noisy), cfg), probe);
        });
    CHECK(testing::relative_error(g.values(), n) <= 1e-3);
    CHECK_THROWS(reconstruct(rng.tensor(20, 20, 5), noisy, cfg));
}

TEST_CASE("smape loss")
{
    Random rng(8);
    const Tensor t = rng.tensor(4, 4, 3, 0.0f, 2.0f);
    CHECK(smape_loss(t, t).loss == 0.0);
    CHECK(smape_loss(Tensor(3, 3, 3, 0.0f), Tensor(3, 3, 3, 1.0f)).loss == doctest::Approx(1.0 / 1.01).epsilon(1e-9));
    CHECK(smape(t, t) == 0.0);
    CHECK_THROWS_AS(smape_loss(t, Tensor(4, 3, 3)), DimensionError);

    Tensor r = rng.tensor(8, 8, 3, -1.0f, 2.0f);
    const Tensor ref = rng.tensor(8, 8, 3, -1.0f, 2.0f);
    const LossResult l = smape_loss(r, ref);
    CHECK(l.loss >= 0.0);
    CHECK(l.loss == doctest::Approx(smape(r, ref)).epsilon(1e-12));
    const std::vector<double> n = testing::numeric_gradient(
        r.values(), [&]() { return reference::smape(reference::DTensor(r), reference::DTensor(ref)); });
    std::vector<float> a;
    std::vector<double> nn;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const float d = std::abs(r.raw()[i] - ref.raw()[i]);
        if (d < 1e-3f || std::abs(r.raw()[i]) < 1e-3f) {
            continue;
        }
        a.push_back(l.grad.raw()[i]);
        nn.push_back(n[i]);
    }
    CHECK(testing::relative_error(a, nn) <= 1e-3);
    // subgradient at the kink is zero in the numerator term
    const LossResult at = smape_loss(Tensor(1, 1, 1, 0.5f), Tensor(1, 1, 1, 0.5f));
    CHECK(at.grad.at(0, 0, 0) == 0.0f);
}

TEST_CASE("adam")
{
    std::vector<float> x{1.0f};
    std::vector<float> g{0.5f};
    AdamState s = make_adam_state(std::vector<std::size_t>{1});
    std::vector<std::span<float>> ps{x};
    std::vector<std::span<const float>> gs{g};
    adam_step(ps, gs, s);
    CHECK(1.0f - x[0] == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK(s.step == 1);

    std::vector<float> y{3.0f};
    std::vector<float> zero{0.0f};
    AdamState s2 = make_adam_state(std::vector<std::size_t>{1});
    std::vector<std::span<float>> py{y};
    std::vector<std::span<const float>> gz{zero};
    adam_step(py, gz, s2);
    CHECK(y[0] == 3.0f);

    std::vector<float> q{1.0f};
    AdamState s3 = make_adam_state(std::vector<std::size_t>{1}, AdamHyper{0.1f});
    std::vector<std::span<float>> pq{q};
    for (int i = 0; i < 100; ++i) {
        std::vector<float> grad{2.0f * q[0]};
        std::vector<std::span<const float>> gq{grad};
        adam_step(pq, gq, s3);
    }
    CHECK(std::abs(q[0]) < 0.5f);

    std::vector<float> two{1.0f, 2.0f};
    std::vector<std::span<float>> bad{two};
    CHECK_THROWS_AS(adam_step(bad, gs, s), DimensionError);
}
