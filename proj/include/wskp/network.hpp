#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wskp/kernel_decoder.hpp"
#include "wskp/tensor.hpp"

namespace wskp {

// Convolution weights, kernel laid out out_ch x in_ch x ksize x ksize.
struct ConvParams {
    int out_ch = 0;
    int in_ch = 0;
    int ksize = 1;
    std::vector<float> kernel;
    std::vector<float> bias;

    static ConvParams zeros(int out_ch, int in_ch, int ksize);

    float& weight(int o, int i, int ky, int kx) noexcept
    {
        return kernel[((static_cast<std::size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx];
    }
    float weight(int o, int i, int ky, int kx) const noexcept
    {
        return kernel[((static_cast<std::size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx];
    }
    std::size_t parameter_count() const noexcept { return kernel.size() + bias.size(); }
};

// Same-padding cross-correlation with clamp-to-edge borders.
Tensor conv2d(const Tensor& input, const ConvParams& params);

struct ConvGradients {
    Tensor input;       // empty when not requested
    ConvParams params;  // gradients in the ConvParams layout
};

ConvGradients conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvParams& params,
                              bool want_input_grad = true);

void relu_inplace(Tensor& t);

// Training-time RepVGG block: 1x1 + 3x3 + 5x5 branches (+ identity), then
// ReLU. After reparameterize() the block may carry a single fused 5x5 conv.
struct RepVggBlockParams {
    ConvParams conv1x1;
    ConvParams conv3x3;
    ConvParams conv5x5;
    bool use_identity = false;
    bool has_branches = true;
    std::optional<ConvParams> fused;

    int in_ch() const noexcept;
    int out_ch() const noexcept;
};

enum class BlockMode { multi_branch, fused };

// multi_branch sums the branch convolutions explicitly; fused runs the
// converted 5x5 conv and throws StateError when none is present.
Tensor repvgg_forward(const Tensor& input, const RepVggBlockParams& block, BlockMode mode);

// Folds all branches into one 5x5 conv. A block without branches returns its
// existing fused conv.
ConvParams reparameterize(const RepVggBlockParams& block);

// Converts a block to inference form: fused conv only.
RepVggBlockParams fuse_block(const RepVggBlockParams& block);

// Splits a gradient taken with respect to the fused 5x5 kernel back onto the
// branch parameters (each branch sees the centred slice of the 5x5 grad).
void add_fused_gradient_to_branches(const ConvParams& fused_grad, RepVggBlockParams& branch_grads);

enum class Architecture { plain, multires };

const char* architecture_name(Architecture arch);

struct NetworkConfig {
    Architecture arch = Architecture::plain;
    int input_channels = 10;
    std::vector<int> widths{32, 32, 32, 32, 32, 32};
    FusionConfig fusion;
    int head_ksize = 3;

    // Resolution levels reconstructed (3 for multires, 1 otherwise).
    int levels() const noexcept { return arch == Architecture::multires ? 3 : 1; }
    // Channels emitted by the head: 2M per level plus one blend alpha per
    // adjacent level pair.
    int head_channels() const noexcept;
    void validate() const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Six 32-wide blocks, M=6, k_b=3, k_s=2.
NetworkConfig six_layer_config(int width = 32);
// Three 32-wide blocks, same fusion schedule.
NetworkConfig three_layer_config(int width = 32);
// Six blocks, three reconstruction levels fusing sizes {3, 5}.
NetworkConfig multires_config(int width = 32);

struct NetworkParams {
    NetworkConfig config;
    std::vector<RepVggBlockParams> blocks;
    ConvParams head;

    std::size_t parameter_count() const;
    bool fully_fused() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed);

// Same structure, all zeros (used as a gradient accumulator).
NetworkParams zeros_like(const NetworkParams& params);

// Visits parameter arrays in declaration order: per block the branch
// kernels/biases (1x1, 3x3, 5x5) when present, then the fused conv when
// present, then the head.
void for_each_parameter(NetworkParams& params, const std::function<void(std::span<float>)>& fn);
void for_each_parameter(const NetworkParams& params,
                        const std::function<void(std::span<const float>)>& fn);

// Replaces every block by its fused form.
NetworkParams reparameterize_network(const NetworkParams& params);

// Runs the convolution stack and returns the raw head output.
Tensor network_head(const Tensor& packed, const NetworkParams& params, BlockMode mode);

struct ImportanceOutputs {
    ImportanceMaps importance;
    BlendLogits blend;
};

// Plain architecture: first M head channels are importance maps, the last M
// blend logits.
ImportanceOutputs importance_net_forward(const Tensor& packed, const NetworkParams& params,
                                         BlockMode mode);

ImportanceOutputs split_head(const Tensor& head, int kernel_count, int first_channel = 0);

// Activations cached for backpropagation. Blocks run through their fused
// equivalent, which yields the same output and gradients as the branches.
struct NetworkTrace {
    std::vector<Tensor> activations;  // [0] = input, [l + 1] = output of block l
    std::vector<ConvParams> fused;
    Tensor head;
};

NetworkTrace network_forward_trace(const Tensor& packed, const NetworkParams& params);

// Accumulates parameter gradients for dL/d(head) into `grads`.
void network_backward(const NetworkTrace& trace, const Tensor& grad_head,
                      const NetworkParams& params, NetworkParams& grads);

// Turns the head output into filtered irradiance (single- or multi-level).
Tensor reconstruct(const Tensor& head, const Tensor& noisy_irradiance, const NetworkConfig& config);

// Gradient of reconstruct() with respect to the head output.
Tensor reconstruct_backward(const Tensor& grad_out, const Tensor& head,
                            const Tensor& noisy_irradiance, const NetworkConfig& config);

struct LossResult {
    double loss = 0.0;
    Tensor grad;
};

// Symmetric mean absolute percentage error averaged over pixels and
// channels, with its subgradient (0 at R == t, sign(0) = 0).
LossResult smape_loss(const Tensor& denoised, const Tensor& reference, float eps = 0.01f);
double smape(const Tensor& denoised, const Tensor& reference, float eps = 0.01f);

struct AdamHyper {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamState {
    AdamHyper hyper;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    long step = 0;
};

AdamState make_adam_state(std::span<const std::size_t> shapes, AdamHyper hyper = {});
AdamState make_adam_state(const NetworkParams& params, AdamHyper hyper = {});

// One bias-corrected Adam update over matching parameter/gradient arrays.
void adam_step(std::span<const std::span<float>> params,
               std::span<const std::span<const float>> grads, AdamState& state);
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state);

} // namespace wskp
