#pragma once

#include <filesystem>

#include "wskp/tensor.hpp"

namespace wskp {

enum class ImageFormat { pfm_color, pfm_gray, png8 };

struct ImageHeader {
    ImageFormat format = ImageFormat::pfm_color;
    int width = 0;
    int height = 0;
    // PFM only: magnitude is a scale factor, sign encodes byte order
    // (negative = little-endian).
    float scale = -1.0f;
};

// Parses just the header of a PFM file.
ImageHeader read_pfm_header(const std::filesystem::path& path);

// Reads a "PF" (3-channel) or "Pf" (1-channel) file. Rows are flipped from
// the file's bottom-to-top order into top-to-bottom tensor rows.
Tensor read_pfm(const std::filesystem::path& path);

// Writes a little-endian PFM (scale -1). Channels must be 1 or 3.
void write_pfm(const Tensor& tensor, const std::filesystem::path& path);

// 8-bit sRGB-tagged PNG preview. Values are clamped to [0, 1] before
// quantization; 1-channel tensors are written as grey RGB.
void write_png(const Tensor& tensor, const std::filesystem::path& path);

} // namespace wskp
