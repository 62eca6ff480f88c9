#include "wskp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "wskp/errors.hpp"
#include "wskp/image_io.hpp"
#include "wskp/network.hpp"
#include "wskp/preprocess.hpp"

namespace wskp {

namespace fs = std::filesystem;

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_window()
{
    std::vector<double> w(kWindow * kWindow);
    const int r = kWindow / 2;
    double sum = 0.0;
    for (int y = 0; y < kWindow; ++y) {
        for (int x = 0; x < kWindow; ++x) {
            const double d2 = static_cast<double>((y - r) * (y - r) + (x - r) * (x - r));
            w[y * kWindow + x] = std::exp(-d2 / (2.0 * kSigma * kSigma));
            sum += w[y * kWindow + x];
        }
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

std::vector<fs::path> collect_frames(const fs::path& dir, const std::string& name)
{
    if (!fs::is_directory(dir)) {
        throw IoError(dir.string() + " is not a directory");
    }
    std::vector<fs::path> subdirs;
    std::vector<fs::path> flat;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string fname = entry.path().filename().string();
        if (entry.is_directory() && fname.rfind("frame_", 0) == 0 && fs::exists(entry.path() / name)) {
            subdirs.push_back(entry.path() / name);
        } else if (entry.is_regular_file() && entry.path().extension() == ".pfm") {
            flat.push_back(entry.path());
        }
    }
    std::vector<fs::path>& chosen = subdirs.empty() ? flat : subdirs;
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

} // namespace

double psnr(const Tensor& a, const Tensor& b, double peak)
{
    if (!a.same_shape(b)) {
        throw DimensionError("psnr: dimension mismatch");
    }
    if (!(peak > 0.0)) {
        throw DomainError("psnr: peak must be positive");
    }
    if (a.size() == 0) {
        throw DimensionError("psnr: empty images");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.raw()[i]) - b.raw()[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -10.0 * std::log10(mse / (peak * peak));
}

double ssim(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b)) {
        throw DimensionError("ssim: dimension mismatch");
    }
    if (a.height() < kWindow || a.width() < kWindow) {
        throw DimensionError("ssim: image smaller than the 11x11 window");
    }
    static const std::vector<double> win = gaussian_window();
    const int oh = a.height() - kWindow + 1;
    const int ow = a.width() - kWindow + 1;
    const int ch = a.channels();
    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        double channel_sum = 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int wy = 0; wy < kWindow; ++wy) {
                    for (int wx = 0; wx < kWindow; ++wx) {
                        const double w = win[wy * kWindow + wx];
                        const double va = a.at(y + wy, x + wx, c);
                        const double vb = b.at(y + wy, x + wx, c);
                        ma += w * va;
                        mb += w * vb;
                        saa += w * va * va;
                        sbb += w * vb * vb;
                        sab += w * va * vb;
                    }
                }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                channel_sum += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                               ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
            }
        }
        total += channel_sum / (static_cast<double>(oh) * ow);
    }
    return total / ch;
}

FrameMetrics evaluate_frame(const Tensor& denoised, const Tensor& reference, float tone_gamma,
                            int frame_index)
{
    if (!denoised.same_shape(reference)) {
        throw DimensionError("evaluate_frame: dimension mismatch");
    }
    const Tensor a = tone_map(denoised, tone_gamma);
    const Tensor b = tone_map(reference, tone_gamma);
    FrameMetrics m;
    m.frame_index = frame_index;
    m.psnr_db = psnr(a, b, 1.0);
    m.ssim = ssim(a, b);
    m.smape = smape(a, b);
    return m;
}

MetricReport evaluate_pairs(const std::vector<Tensor>& denoised, const std::vector<Tensor>& reference,
                            float tone_gamma)
{
    if (denoised.size() != reference.size()) {
        throw ConfigError("frame count mismatch: " + std::to_string(denoised.size()) + " denoised vs " +
                          std::to_string(reference.size()) + " reference");
    }
    if (denoised.empty()) {
        throw ConfigError("no frames to evaluate");
    }
    MetricReport r;
    r.tone_gamma = tone_gamma;
    for (std::size_t i = 0; i < denoised.size(); ++i) {
        r.per_frame.push_back(evaluate_frame(denoised[i], reference[i], tone_gamma, static_cast<int>(i)));
    }
    for (const FrameMetrics& m : r.per_frame) {
        r.mean_psnr_db += m.psnr_db;
        r.mean_ssim += m.ssim;
        r.mean_smape += m.smape;
    }
    const double n = static_cast<double>(r.per_frame.size());
    r.mean_psnr_db /= n;
    r.mean_ssim /= n;
    r.mean_smape /= n;
    return r;
}

MetricReport evaluate_sequence(const fs::path& denoised_dir, const fs::path& reference_dir,
                               float tone_gamma, const std::string& denoised_name,
                               const std::string& reference_name)
{
    const std::vector<fs::path> den = collect_frames(denoised_dir, denoised_name);
    const std::vector<fs::path> ref = collect_frames(reference_dir, reference_name);
    if (den.size() != ref.size()) {
        throw ConfigError("frame count mismatch: " + std::to_string(den.size()) + " in " +
                          denoised_dir.string() + " vs " + std::to_string(ref.size()) + " in " +
                          reference_dir.string());
    }
    std::vector<Tensor> a;
    std::vector<Tensor> b;
    for (std::size_t i = 0; i < den.size(); ++i) {
        a.push_back(read_pfm(den[i]));
        b.push_back(read_pfm(ref[i]));
    }
    return evaluate_pairs(a, b, tone_gamma);
}

nlohmann::json MetricReport::to_json() const
{
    auto psnr_value = [](double v) { return std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    nlohmann::json j;
    j["config"] = {{"tone_gamma", tone_gamma},
                   {"color_space", "ldr_gamma"},
                   {"psnr_peak", 1.0},
                   {"ssim_window", kWindow},
                   {"ssim_sigma", kSigma},
                   {"smape_eps", 0.01}};
    nlohmann::json frames = nlohmann::json::array();
    for (const FrameMetrics& m : per_frame) {
        nlohmann::json f = {{"frame_index", m.frame_index},
                            {"psnr_db", psnr_value(m.psnr_db)},
                            {"ssim", m.ssim},
                            {"smape", m.smape}};
        if (std::isinf(m.psnr_db)) {
            f["identical"] = true;
        }
        frames.push_back(f);
    }
    j["per_frame"] = frames;
    nlohmann::json agg = {{"psnr_db", psnr_value(mean_psnr_db)}, {"ssim", mean_ssim}, {"smape", mean_smape}};
    if (std::isinf(mean_psnr_db)) {
        agg["identical"] = true;
    }
    j["aggregate"] = agg;
    return j;
}

void write_report(const MetricReport& report, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << report.to_json().dump(2) << '\n';
}

} // namespace wskp
