#include "wskp/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "wskp/errors.hpp"
#include "wskp/parallel.hpp"
#include "wskp/simd/kernels.hpp"

namespace wskp {

namespace {

int round_up8(int n) { return (n + 7) / 8 * 8; }

void check_conv(const Tensor& input, const ConvParams& params)
{
    if (params.ksize < 1 || params.ksize % 2 == 0) {
        throw ConfigError("conv kernel size must be odd, got " + std::to_string(params.ksize));
    }
    if (input.channels() != params.in_ch) {
        throw DimensionError("conv expects " + std::to_string(params.in_ch) +
                             " input channels, got " + std::to_string(input.channels()));
    }
    const std::size_t taps = static_cast<std::size_t>(params.ksize) * params.ksize;
    if (params.kernel.size() != taps * params.in_ch * params.out_ch ||
        params.bias.size() != static_cast<std::size_t>(params.out_ch)) {
        throw DimensionError("conv parameter arrays do not match their declared shape");
    }
}

simd::ConvGeometry geometry(const Tensor& input, const ConvParams& params)
{
    simd::ConvGeometry g;
    g.height = input.height();
    g.width = input.width();
    g.in_ch = params.in_ch;
    g.out_ch = params.out_ch;
    g.out_pad = round_up8(params.out_ch);
    g.in_pad = round_up8(params.in_ch);
    g.ksize = params.ksize;
    return g;
}

// [tap][in][out_pad]
std::vector<float> pack_weights(const ConvParams& p, int out_pad)
{
    const int taps = p.ksize * p.ksize;
    std::vector<float> packed(static_cast<std::size_t>(taps) * p.in_ch * out_pad, 0.0f);
    for (int o = 0; o < p.out_ch; ++o) {
        for (int i = 0; i < p.in_ch; ++i) {
            for (int t = 0; t < taps; ++t) {
                packed[(static_cast<std::size_t>(t) * p.in_ch + i) * out_pad + o] =
                    p.kernel[(static_cast<std::size_t>(o) * p.in_ch + i) * taps + t];
            }
        }
    }
    return packed;
}

// [tap][out][in_pad]
std::vector<float> pack_weights_transposed(const ConvParams& p, int in_pad)
{
    const int taps = p.ksize * p.ksize;
    std::vector<float> packed(static_cast<std::size_t>(taps) * p.out_ch * in_pad, 0.0f);
    for (int o = 0; o < p.out_ch; ++o) {
        for (int i = 0; i < p.in_ch; ++i) {
            for (int t = 0; t < taps; ++t) {
                packed[(static_cast<std::size_t>(t) * p.out_ch + o) * in_pad + i] =
                    p.kernel[(static_cast<std::size_t>(o) * p.in_ch + i) * taps + t];
            }
        }
    }
    return packed;
}

void add_into(std::vector<float>& dst, const std::vector<float>& src)
{
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
}

// Adds a k x k kernel into the centre of a 5x5 kernel of the same channels.
void add_centered(ConvParams& dst5, const ConvParams& src)
{
    const int off = (dst5.ksize - src.ksize) / 2;
    for (int o = 0; o < src.out_ch; ++o) {
        for (int i = 0; i < src.in_ch; ++i) {
            for (int ky = 0; ky < src.ksize; ++ky) {
                for (int kx = 0; kx < src.ksize; ++kx) {
                    dst5.weight(o, i, ky + off, kx + off) += src.weight(o, i, ky, kx);
                }
            }
        }
    }
}

void add_center_slice(ConvParams& dst, const ConvParams& src5)
{
    const int off = (src5.ksize - dst.ksize) / 2;
    for (int o = 0; o < dst.out_ch; ++o) {
        for (int i = 0; i < dst.in_ch; ++i) {
            for (int ky = 0; ky < dst.ksize; ++ky) {
                for (int kx = 0; kx < dst.ksize; ++kx) {
                    dst.weight(o, i, ky, kx) += src5.weight(o, i, ky + off, kx + off);
                }
            }
        }
    }
    add_into(dst.bias, src5.bias);
}

class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : rng_(seed) {}
    float operator()(float bound)
    {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return static_cast<float>((2.0 * u - 1.0) * bound);
    }

private:
    std::mt19937_64 rng_;
};

ConvParams init_conv(int out_ch, int in_ch, int ksize, UniformSource& uni)
{
    ConvParams p = ConvParams::zeros(out_ch, in_ch, ksize);
    const float bound = 1.0f / std::sqrt(static_cast<float>(in_ch * ksize * ksize));
    for (float& w : p.kernel) {
        w = uni(bound);
    }
    for (float& b : p.bias) {
        b = uni(bound);
    }
    return p;
}

Tensor downsample_times(Tensor t, int times)
{
    for (int i = 0; i < times; ++i) {
        t = downsample_2x2(t);
    }
    return t;
}

Tensor downsample_backward_times(Tensor t, int times)
{
    for (int i = 0; i < times; ++i) {
        t = downsample_2x2_backward(t);
    }
    return t;
}

Tensor sigmoid(const Tensor& t)
{
    Tensor out = t;
    for (float& v : out.values()) {
        v = 1.0f / (1.0f + std::exp(-v));
    }
    return out;
}

// Writes `src` into channels [first, first + src.channels()) of `dst`.
void scatter_channels(Tensor& dst, const Tensor& src, int first)
{
    const int c = src.channels();
    const std::size_t n = src.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        std::copy_n(src.raw() + p * c, c, dst.raw() + p * dst.channels() + first);
    }
}

struct LevelSlices {
    ImportanceMaps importance;
    BlendLogits blend;
    Tensor noisy;
};

LevelSlices level_inputs(const Tensor& head, const Tensor& noisy, int level, int m)
{
    const ImportanceOutputs split = split_head(head, m, level * 2 * m);
    return {ImportanceMaps{downsample_times(split.importance.maps, level)},
            BlendLogits{downsample_times(split.blend.logits, level)},
            downsample_times(noisy, level)};
}

} // namespace

ConvParams ConvParams::zeros(int out_ch, int in_ch, int ksize)
{
    ConvParams p;
    p.out_ch = out_ch;
    p.in_ch = in_ch;
    p.ksize = ksize;
    p.kernel.assign(static_cast<std::size_t>(out_ch) * in_ch * ksize * ksize, 0.0f);
    p.bias.assign(out_ch, 0.0f);
    return p;
}

Tensor conv2d(const Tensor& input, const ConvParams& params)
{
    check_conv(input, params);
    const simd::ConvGeometry g = geometry(input, params);
    const std::vector<float> packed = pack_weights(params, g.out_pad);
    std::vector<float> bias_pad(g.out_pad, 0.0f);
    std::copy(params.bias.begin(), params.bias.end(), bias_pad.begin());
    const simd::KernelTable& kt = simd::kernels();
    Tensor out(input.height(), input.width(), params.out_ch);
    parallel_for(0, input.height(), [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            kt.conv_forward_row(g, input.raw(), packed.data(), bias_pad.data(), y, out.pixel(y, 0));
        }
    });
    return out;
}

ConvGradients conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvParams& params,
                              bool want_input_grad)
{
    check_conv(input, params);
    if (!grad_out.same_extent(input) || grad_out.channels() != params.out_ch) {
        throw DimensionError("conv2d_backward: grad_out shape mismatch");
    }
    const simd::ConvGeometry g = geometry(input, params);
    const simd::KernelTable& kt = simd::kernels();
    const int taps = params.ksize * params.ksize;

    ConvGradients out;
    out.params = ConvParams::zeros(params.out_ch, params.in_ch, params.ksize);
    const std::size_t n = grad_out.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        const float* go = grad_out.raw() + p * params.out_ch;
        for (int o = 0; o < params.out_ch; ++o) {
            out.params.bias[o] += go[o];
        }
    }

    std::vector<float> grad_packed(static_cast<std::size_t>(taps) * params.in_ch * g.out_pad, 0.0f);
    for (int y = 0; y < input.height(); ++y) {
        kt.conv_grad_weights_row(g, input.raw(), grad_out.pixel(y, 0), y, grad_packed.data());
    }
    for (int o = 0; o < params.out_ch; ++o) {
        for (int i = 0; i < params.in_ch; ++i) {
            for (int t = 0; t < taps; ++t) {
                out.params.kernel[(static_cast<std::size_t>(o) * params.in_ch + i) * taps + t] =
                    grad_packed[(static_cast<std::size_t>(t) * params.in_ch + i) * g.out_pad + o];
            }
        }
    }

    if (want_input_grad) {
        const std::vector<float> packed_t = pack_weights_transposed(params, g.in_pad);
        out.input = Tensor(input.height(), input.width(), params.in_ch);
        for (int y = 0; y < input.height(); ++y) {
            kt.conv_grad_input_row(g, packed_t.data(), grad_out.pixel(y, 0), y, out.input.raw());
        }
    }
    return out;
}

void relu_inplace(Tensor& t)
{
    for (float& v : t.values()) {
        v = v > 0.0f ? v : 0.0f;
    }
}

int RepVggBlockParams::in_ch() const noexcept
{
    return has_branches ? conv5x5.in_ch : (fused ? fused->in_ch : 0);
}

int RepVggBlockParams::out_ch() const noexcept
{
    return has_branches ? conv5x5.out_ch : (fused ? fused->out_ch : 0);
}

Tensor repvgg_forward(const Tensor& input, const RepVggBlockParams& block, BlockMode mode)
{
    Tensor out;
    if (mode == BlockMode::fused) {
        if (!block.fused) {
            throw StateError("fused inference requested but the block has not been reparameterized");
        }
        out = conv2d(input, *block.fused);
    } else {
        if (!block.has_branches) {
            throw StateError("multi-branch inference requested on a fused-only block");
        }
        out = conv2d(input, block.conv1x1);
        const Tensor b3 = conv2d(input, block.conv3x3);
        const Tensor b5 = conv2d(input, block.conv5x5);
        float* o = out.raw();
        for (std::size_t i = 0; i < out.size(); ++i) {
            o[i] = (o[i] + b3.raw()[i]) + b5.raw()[i];
        }
        if (block.use_identity) {
            if (input.channels() != out.channels()) {
                throw ConfigError("identity branch needs equal input and output channels");
            }
            for (std::size_t i = 0; i < out.size(); ++i) {
                o[i] += input.raw()[i];
            }
        }
    }
    relu_inplace(out);
    return out;
}

ConvParams reparameterize(const RepVggBlockParams& block)
{
    if (!block.has_branches) {
        if (!block.fused) {
            throw StateError("block has neither branches nor a fused conv");
        }
        return *block.fused;
    }
    const int in_ch = block.conv5x5.in_ch;
    const int out_ch = block.conv5x5.out_ch;
    if (block.conv1x1.ksize != 1 || block.conv3x3.ksize != 3 || block.conv5x5.ksize != 5 ||
        block.conv1x1.in_ch != in_ch || block.conv3x3.in_ch != in_ch ||
        block.conv1x1.out_ch != out_ch || block.conv3x3.out_ch != out_ch) {
        throw ConfigError("RepVGG branch shapes are inconsistent");
    }
    if (block.use_identity && in_ch != out_ch) {
        throw ConfigError("identity branch needs equal input and output channels");
    }
    ConvParams fused = block.conv5x5;
    add_centered(fused, block.conv3x3);
    add_centered(fused, block.conv1x1);
    add_into(fused.bias, block.conv3x3.bias);
    add_into(fused.bias, block.conv1x1.bias);
    if (block.use_identity) {
        for (int c = 0; c < in_ch; ++c) {
            fused.weight(c, c, 2, 2) += 1.0f;
        }
    }
    return fused;
}

RepVggBlockParams fuse_block(const RepVggBlockParams& block)
{
    RepVggBlockParams out;
    out.use_identity = block.use_identity;
    out.has_branches = false;
    out.fused = reparameterize(block);
    return out;
}

void add_fused_gradient_to_branches(const ConvParams& fused_grad, RepVggBlockParams& branch_grads)
{
    add_into(branch_grads.conv5x5.kernel, fused_grad.kernel);
    add_into(branch_grads.conv5x5.bias, fused_grad.bias);
    add_center_slice(branch_grads.conv3x3, fused_grad);
    add_center_slice(branch_grads.conv1x1, fused_grad);
}

const char* architecture_name(Architecture arch)
{
    return arch == Architecture::multires ? "mr" : "plain";
}

int NetworkConfig::head_channels() const noexcept
{
    const int per_level = 2 * fusion.kernel_count;
    return per_level * levels() + (levels() - 1);
}

void NetworkConfig::validate() const
{
    fusion.validate();
    if (widths.empty()) {
        throw ConfigError("network needs at least one block");
    }
    for (int w : widths) {
        if (w < 1) {
            throw ConfigError("block widths must be positive");
        }
    }
    if (input_channels < 1) {
        throw ConfigError("input_channels must be positive");
    }
    if (head_ksize < 1 || head_ksize % 2 == 0) {
        throw ConfigError("head kernel size must be odd");
    }
}

NetworkConfig six_layer_config(int width)
{
    NetworkConfig cfg;
    cfg.widths.assign(6, width);
    return cfg;
}

NetworkConfig three_layer_config(int width)
{
    NetworkConfig cfg;
    cfg.widths.assign(3, width);
    return cfg;
}

NetworkConfig multires_config(int width)
{
    NetworkConfig cfg;
    cfg.arch = Architecture::multires;
    cfg.widths.assign(6, width);
    cfg.fusion = FusionConfig{2, 3, 2};
    return cfg;
}

std::size_t NetworkParams::parameter_count() const
{
    std::size_t n = 0;
    for_each_parameter(*this, [&](std::span<const float> s) { n += s.size(); });
    return n;
}

bool NetworkParams::fully_fused() const
{
    return std::all_of(blocks.begin(), blocks.end(),
                       [](const RepVggBlockParams& b) { return !b.has_branches && b.fused; });
}

NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed)
{
    config.validate();
    UniformSource uni(seed);
    NetworkParams params;
    params.config = config;
    int in_ch = config.input_channels;
    for (int width : config.widths) {
        RepVggBlockParams block;
        block.conv1x1 = init_conv(width, in_ch, 1, uni);
        block.conv3x3 = init_conv(width, in_ch, 3, uni);
        block.conv5x5 = init_conv(width, in_ch, 5, uni);
        block.use_identity = (in_ch == width);
        params.blocks.push_back(std::move(block));
        in_ch = width;
    }
    params.head = init_conv(config.head_channels(), in_ch, config.head_ksize, uni);
    return params;
}

NetworkParams zeros_like(const NetworkParams& params)
{
    NetworkParams out = params;
    for_each_parameter(out, [](std::span<float> s) { std::fill(s.begin(), s.end(), 0.0f); });
    return out;
}

void for_each_parameter(NetworkParams& params, const std::function<void(std::span<float>)>& fn)
{
    auto visit = [&](ConvParams& c) {
        fn(c.kernel);
        fn(c.bias);
    };
    for (RepVggBlockParams& b : params.blocks) {
        if (b.has_branches) {
            visit(b.conv1x1);
            visit(b.conv3x3);
            visit(b.conv5x5);
        }
        if (b.fused) {
            visit(*b.fused);
        }
    }
    visit(params.head);
}

void for_each_parameter(const NetworkParams& params,
                        const std::function<void(std::span<const float>)>& fn)
{
    auto visit = [&](const ConvParams& c) {
        fn(c.kernel);
        fn(c.bias);
    };
    for (const RepVggBlockParams& b : params.blocks) {
        if (b.has_branches) {
            visit(b.conv1x1);
            visit(b.conv3x3);
            visit(b.conv5x5);
        }
        if (b.fused) {
            visit(*b.fused);
        }
    }
    visit(params.head);
}

NetworkParams reparameterize_network(const NetworkParams& params)
{
    NetworkParams out;
    out.config = params.config;
    out.head = params.head;
    for (const RepVggBlockParams& b : params.blocks) {
        out.blocks.push_back(fuse_block(b));
    }
    return out;
}

Tensor network_head(const Tensor& packed, const NetworkParams& params, BlockMode mode)
{
    Tensor x = packed;
    for (const RepVggBlockParams& b : params.blocks) {
        const BlockMode m = (mode == BlockMode::multi_branch && !b.has_branches) ? BlockMode::fused : mode;
        x = repvgg_forward(x, b, m);
    }
    return conv2d(x, params.head);
}

ImportanceOutputs split_head(const Tensor& head, int kernel_count, int first_channel)
{
    return {ImportanceMaps{head.channel_slice(first_channel, kernel_count)},
            BlendLogits{head.channel_slice(first_channel + kernel_count, kernel_count)}};
}

ImportanceOutputs importance_net_forward(const Tensor& packed, const NetworkParams& params,
                                         BlockMode mode)
{
    if (params.config.arch != Architecture::plain) {
        throw ConfigError("importance_net_forward expects the plain architecture");
    }
    const Tensor head = network_head(packed, params, mode);
    if (head.channels() != 2 * params.config.fusion.kernel_count) {
        throw ConfigError("head emits " + std::to_string(head.channels()) + " channels, expected " +
                          std::to_string(2 * params.config.fusion.kernel_count));
    }
    return split_head(head, params.config.fusion.kernel_count);
}

NetworkTrace network_forward_trace(const Tensor& packed, const NetworkParams& params)
{
    NetworkTrace trace;
    trace.activations.reserve(params.blocks.size() + 1);
    trace.activations.push_back(packed);
    for (const RepVggBlockParams& b : params.blocks) {
        trace.fused.push_back(reparameterize(b));
        Tensor z = conv2d(trace.activations.back(), trace.fused.back());
        relu_inplace(z);
        trace.activations.push_back(std::move(z));
    }
    trace.head = conv2d(trace.activations.back(), params.head);
    return trace;
}

void network_backward(const NetworkTrace& trace, const Tensor& grad_head,
                      const NetworkParams& params, NetworkParams& grads)
{
    ConvGradients hg = conv2d_backward(grad_head, trace.activations.back(), params.head, true);
    add_into(grads.head.kernel, hg.params.kernel);
    add_into(grads.head.bias, hg.params.bias);
    Tensor g = std::move(hg.input);
    for (int l = static_cast<int>(params.blocks.size()) - 1; l >= 0; --l) {
        const Tensor& act = trace.activations[l + 1];
        float* gv = g.raw();
        const float* av = act.raw();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(av[i] > 0.0f)) {
                gv[i] = 0.0f;
            }
        }
        ConvGradients cg = conv2d_backward(g, trace.activations[l], trace.fused[l], l > 0);
        RepVggBlockParams& bg = grads.blocks[l];
        if (params.blocks[l].has_branches) {
            add_fused_gradient_to_branches(cg.params, bg);
        } else {
            add_into(bg.fused->kernel, cg.params.kernel);
            add_into(bg.fused->bias, cg.params.bias);
        }
        g = std::move(cg.input);
    }
}

Tensor reconstruct(const Tensor& head, const Tensor& noisy_irradiance, const NetworkConfig& config)
{
    const int m = config.fusion.kernel_count;
    if (head.channels() != config.head_channels() || !head.same_extent(noisy_irradiance)) {
        throw DimensionError("head output does not match the network configuration");
    }
    if (config.arch == Architecture::plain) {
        const ImportanceOutputs split = split_head(head, m);
        return filter_fuse_streaming(split.importance, split.blend, noisy_irradiance, config.fusion);
    }
    const int levels = config.levels();
    std::vector<Tensor> filtered(levels);
    for (int l = 0; l < levels; ++l) {
        const LevelSlices in = level_inputs(head, noisy_irradiance, l, m);
        filtered[l] = filter_fuse_streaming(in.importance, in.blend, in.noisy, config.fusion);
    }
    Tensor out = filtered[levels - 1];
    for (int l = levels - 2; l >= 0; --l) {
        const Tensor alpha =
            sigmoid(downsample_times(head.channel_slice(levels * 2 * m + l, 1), l));
        out = combine_resolutions(filtered[l], out, alpha);
    }
    return out;
}

Tensor reconstruct_backward(const Tensor& grad_out, const Tensor& head,
                            const Tensor& noisy_irradiance, const NetworkConfig& config)
{
    const int m = config.fusion.kernel_count;
    Tensor grad_head(head.height(), head.width(), head.channels());
    if (config.arch == Architecture::plain) {
        const ImportanceOutputs split = split_head(head, m);
        const FilterFuseGradients g = filter_fuse_backward(grad_out, split.importance, split.blend,
                                                           noisy_irradiance, config.fusion);
        scatter_channels(grad_head, g.importance, 0);
        scatter_channels(grad_head, g.blend_logits, m);
        return grad_head;
    }
    const int levels = config.levels();
    std::vector<LevelSlices> inputs;
    std::vector<Tensor> filtered(levels);
    std::vector<Tensor> alphas(levels - 1);
    for (int l = 0; l < levels; ++l) {
        inputs.push_back(level_inputs(head, noisy_irradiance, l, m));
        filtered[l] = filter_fuse_streaming(inputs[l].importance, inputs[l].blend, inputs[l].noisy,
                                            config.fusion);
    }
    // combined[l] is the output after merging levels l..L-1.
    std::vector<Tensor> combined(levels);
    combined[levels - 1] = filtered[levels - 1];
    for (int l = levels - 2; l >= 0; --l) {
        alphas[l] = sigmoid(downsample_times(head.channel_slice(levels * 2 * m + l, 1), l));
        combined[l] = combine_resolutions(filtered[l], combined[l + 1], alphas[l]);
    }
    std::vector<Tensor> grad_filtered(levels);
    Tensor g = grad_out;
    for (int l = 0; l < levels - 1; ++l) {
        CombineGradients cg = combine_resolutions_backward(g, filtered[l], combined[l + 1], alphas[l]);
        grad_filtered[l] = std::move(cg.fine);
        Tensor grad_logit = std::move(cg.alpha);
        const float* a = alphas[l].raw();
        float* gl = grad_logit.raw();
        for (std::size_t i = 0; i < grad_logit.size(); ++i) {
            gl[i] *= a[i] * (1.0f - a[i]);
        }
        scatter_channels(grad_head, downsample_backward_times(std::move(grad_logit), l),
                         levels * 2 * m + l);
        g = std::move(cg.coarse);
    }
    grad_filtered[levels - 1] = std::move(g);
    for (int l = 0; l < levels; ++l) {
        const FilterFuseGradients fg = filter_fuse_backward(
            grad_filtered[l], inputs[l].importance, inputs[l].blend, inputs[l].noisy, config.fusion);
        scatter_channels(grad_head, downsample_backward_times(fg.importance, l), l * 2 * m);
        scatter_channels(grad_head, downsample_backward_times(fg.blend_logits, l), l * 2 * m + m);
    }
    return grad_head;
}

LossResult smape_loss(const Tensor& denoised, const Tensor& reference, float eps)
{
    if (!denoised.same_shape(reference)) {
        throw DimensionError("smape_loss: dimension mismatch");
    }
    if (!(eps > 0.0f)) {
        throw DomainError("smape eps must be positive");
    }
    LossResult out{0.0, Tensor(denoised.height(), denoised.width(), denoised.channels())};
    const std::size_t n = denoised.size();
    if (n == 0) {
        return out;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const float* r = denoised.raw();
    const float* t = reference.raw();
    float* g = out.grad.raw();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(r[i]) - t[i];
        const double ad = std::abs(d);
        const double den = std::abs(static_cast<double>(r[i])) + std::abs(static_cast<double>(t[i])) + eps;
        sum += ad / den;
        const double sd = (d > 0.0) - (d < 0.0);
        const double sr = (r[i] > 0.0f) - (r[i] < 0.0f);
        g[i] = static_cast<float>(inv_n * (sd / den - ad * sr / (den * den)));
    }
    out.loss = sum * inv_n;
    return out;
}

double smape(const Tensor& denoised, const Tensor& reference, float eps)
{
    if (!denoised.same_shape(reference)) {
        throw DimensionError("smape: dimension mismatch");
    }
    const std::size_t n = denoised.size();
    if (n == 0) {
        return 0.0;
    }
    const float* r = denoised.raw();
    const float* t = reference.raw();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ad = std::abs(static_cast<double>(r[i]) - t[i]);
        sum += ad / (std::abs(static_cast<double>(r[i])) + std::abs(static_cast<double>(t[i])) + eps);
    }
    return sum / static_cast<double>(n);
}

AdamState make_adam_state(std::span<const std::size_t> shapes, AdamHyper hyper)
{
    AdamState state;
    state.hyper = hyper;
    for (std::size_t n : shapes) {
        state.m.emplace_back(n, 0.0f);
        state.v.emplace_back(n, 0.0f);
    }
    return state;
}

AdamState make_adam_state(const NetworkParams& params, AdamHyper hyper)
{
    std::vector<std::size_t> shapes;
    for_each_parameter(params, [&](std::span<const float> s) { shapes.push_back(s.size()); });
    return make_adam_state(shapes, hyper);
}

void adam_step(std::span<const std::span<float>> params,
               std::span<const std::span<const float>> grads, AdamState& state)
{
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw DimensionError("adam_step: parameter/gradient/state counts differ");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size()) {
            throw DimensionError("adam_step: parameter array " + std::to_string(k) + " shape mismatch");
        }
    }
    state.step += 1;
    const AdamHyper& h = state.hyper;
    const double bc1 = 1.0 - std::pow(static_cast<double>(h.beta1), static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(h.beta2), static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        std::span<float> p = params[k];
        std::span<const float> g = grads[k];
        std::vector<float>& m = state.m[k];
        std::vector<float>& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = h.beta1 * m[i] + (1.0f - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0f - h.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= static_cast<float>(h.lr * m_hat / (std::sqrt(v_hat) + h.eps));
        }
    }
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state)
{
    std::vector<std::span<float>> p;
    std::vector<std::span<const float>> g;
    for_each_parameter(params, [&](std::span<float> s) { p.push_back(s); });
    for_each_parameter(grads, [&](std::span<const float> s) { g.push_back(s); });
    adam_step(std::span<const std::span<float>>(p), std::span<const std::span<const float>>(g), state);
}

} // namespace wskp
