#pragma once

#include <span>
#include <vector>

#include "wskp/tensor.hpp"

namespace wskp {

// Kernel-size schedule: k_i = base_size + i * step for i in [0, kernel_count).
struct FusionConfig {
    int kernel_count = 6;
    int base_size = 3;
    int step = 2;

    int size(int i) const noexcept { return base_size + i * step; }
    int max_size() const noexcept { return size(kernel_count - 1); }
    std::vector<int> sizes() const;
    // Sum of k_i^2, the number of filter taps per pixel.
    long total_taps() const noexcept;

    // Throws ConfigError unless every size is odd and positive.
    void validate() const;
    // Additionally checks that the largest kernel fits inside height x width.
    void validate_for(int height, int width) const;

    friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

// H x W x M importance terms, one map per kernel size.
struct ImportanceMaps {
    Tensor maps;
};

// H x W x M pre-softmax blend weights.
struct BlendLogits {
    Tensor logits;
};

// H x W x (k * k) per-pixel filter weights. Channel j holds the weight of
// offset (j / k - r, j % k - r), r = (k - 1) / 2.
struct KernelMap {
    Tensor weights;
    int size = 1;
};

// --- explicit path ----------------------------------------------------------

// Gathers every pixel's k x k neighbourhood of a single-channel map into
// k * k channels (row-major offsets, clamp-to-edge).
Tensor unfold_importance(const Tensor& imap, int k);

// Softmax over the unfolded channels: the weight of neighbour q in p's
// window is exp(I(q)) normalised over the window.
KernelMap construct_kernel_map(const Tensor& imap, int k);

// Applies one kernel map to a 3-channel image with shared weights per channel.
Tensor apply_kernel_map(const KernelMap& kmap, const Tensor& noisy);

// Per-pixel softmax over channels.
Tensor channel_softmax(const Tensor& logits);

// Blends M filtered images with per-pixel softmax(logits) weights.
Tensor fuse(std::span<const Tensor> filtered, const BlendLogits& blend);

// --- streaming path ---------------------------------------------------------

// construct_kernel_map -> apply_kernel_map -> fuse in a single pass per pixel.
// Works on row bands of clamp-extended planar scratch and never allocates a
// buffer with a k * k channel dimension.
Tensor filter_fuse_streaming(const ImportanceMaps& imaps, const BlendLogits& blend,
                             const Tensor& noisy, const FusionConfig& cfg);

struct FilterFuseGradients {
    Tensor importance;  // H x W x M
    Tensor blend_logits;  // H x W x M
};

// Exact adjoint of filter_fuse_streaming with respect to the importance maps
// and the blend logits. The noisy colour is treated as data.
FilterFuseGradients filter_fuse_backward(const Tensor& grad_out, const ImportanceMaps& imaps,
                                         const BlendLogits& blend, const Tensor& noisy,
                                         const FusionConfig& cfg);

// --- multi-resolution combine -----------------------------------------------

// o = fine - alpha * U(D(fine)) + alpha * U(coarse)
Tensor combine_resolutions(const Tensor& fine, const Tensor& coarse, const Tensor& alpha);

struct CombineGradients {
    Tensor fine;
    Tensor coarse;
    Tensor alpha;
};

CombineGradients combine_resolutions_backward(const Tensor& grad_out, const Tensor& fine,
                                              const Tensor& coarse, const Tensor& alpha);

} // namespace wskp
