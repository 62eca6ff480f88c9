#pragma once

// Data-parallel inner loops. Each entry has a portable scalar reference and,
// where the host supports it, an AVX2+FMA variant chosen at runtime. Both
// variants keep the same per-output summation order, so they differ only by
// FMA contraction and the vector exp approximation.

namespace wskp::simd {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);

// Best instruction set the running CPU supports.
Isa detected_isa();

// ISA currently used by kernels(). Defaults to detected_isa(); the
// WSKP_SIMD environment variable ("scalar" or "avx2") overrides it.
Isa active_isa();

// Forces a specific ISA. Throws ConfigError if the CPU lacks it.
void set_active_isa(Isa isa);

// Band of clamp-extended planar data for the streaming filter. The first
// kernel_count planes hold importance maps, the next three the noisy colour
// channels. Each plane is rows x stride floats, where stride = width + 2 * pad
// and the tensor's column x lives at scratch column x + pad.
struct FuseBand {
    const float* planes = nullptr;
    long plane_size = 0;
    int stride = 0;
    int pad = 0;
    int kernel_count = 0;
    const int* radii = nullptr;
};

// Filters one output row: for every pixel the window softmax of each
// importance plane weights the colour planes, and the per-kernel results are
// blended with `alpha` (already softmax-normalised, width x kernel_count
// interleaved). `center_row` is the scratch row of the output row.
// Writes width x 3 interleaved floats to `out`.
using FuseRowFn = void (*)(const FuseBand& band, int center_row, const float* alpha,
                           int width, float* out);

// Same-padding clamp-to-edge convolution on interleaved H x W x C tensors.
// Weights are packed [tap][in][out_pad] with out_pad a multiple of 8 and
// zero beyond out_ch; `transposed` weights for the input gradient are packed
// [tap][out][in_pad].
struct ConvGeometry {
    int height = 0;
    int width = 0;
    int in_ch = 0;
    int out_ch = 0;
    int out_pad = 0;
    int in_pad = 0;
    int ksize = 1;
};

// out_row[x * out_ch + o] = bias[o] + sum_{tap,i} w[tap][i][o] * in(clamp(y+dy, x+dx), i)
using ConvForwardRowFn = void (*)(const ConvGeometry& g, const float* input,
                                  const float* packed_w, const float* bias_pad, int y,
                                  float* out_row);

// grad_w[tap][i][o] += sum_x in(clamp(y+dy, x+dx), i) * grad_row[x * out_ch + o]
using ConvGradWeightsRowFn = void (*)(const ConvGeometry& g, const float* input,
                                      const float* grad_row, int y, float* grad_w);

// grad_input(clamp(y+dy, x+dx), i) += sum_o w[tap][i][o] * grad_row[x * out_ch + o]
// Touches rows y - r .. y + r, so rows must be processed sequentially.
using ConvGradInputRowFn = void (*)(const ConvGeometry& g, const float* packed_wt,
                                    const float* grad_row, int y, float* grad_input);

struct KernelTable {
    Isa isa;
    FuseRowFn fuse_row;
    ConvForwardRowFn conv_forward_row;
    ConvGradWeightsRowFn conv_grad_weights_row;
    ConvGradInputRowFn conv_grad_input_row;
};

const KernelTable& kernels();
const KernelTable& kernels_for(Isa isa);

// Per-ISA tables, defined in their own translation units.
const KernelTable& scalar_kernels();
#if defined(WSKP_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

// Scalar single-pixel fuse step; the vector variants finish row tails with it.
void fuse_pixel_scalar(const FuseBand& band, int center_row, int x, const float* alpha,
                       float* out);

} // namespace wskp::simd
