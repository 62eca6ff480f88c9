#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wskp/tensor.hpp"

namespace wskp {

// -10 log10(MSE / peak^2) over all pixels and channels. Identical images
// give +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean single-scale SSIM: 11x11 Gaussian window (sigma 1.5), valid region
// only, computed per channel and averaged.
double ssim(const Tensor& a, const Tensor& b);

struct FrameMetrics {
    int frame_index = 0;
    double psnr_db = 0.0;  // +infinity for identical frames
    double ssim = 0.0;
    double smape = 0.0;
};

struct MetricReport {
    std::vector<FrameMetrics> per_frame;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
    double mean_smape = 0.0;
    float tone_gamma = 2.2f;

    nlohmann::json to_json() const;
};

// Metrics on gamma tone-mapped images, one entry per pair.
FrameMetrics evaluate_frame(const Tensor& denoised, const Tensor& reference, float tone_gamma,
                            int frame_index = 0);
MetricReport evaluate_pairs(const std::vector<Tensor>& denoised, const std::vector<Tensor>& reference,
                            float tone_gamma);

// Inputs are either directories of frame_#### subdirectories (reading the
// given file name from each) or directories of flat .pfm files matched in
// sorted order.
MetricReport evaluate_sequence(const std::filesystem::path& denoised_dir,
                               const std::filesystem::path& reference_dir, float tone_gamma,
                               const std::string& denoised_name = "denoised.pfm",
                               const std::string& reference_name = "reference.pfm");

void write_report(const MetricReport& report, const std::filesystem::path& path);

} // namespace wskp
