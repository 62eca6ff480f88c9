#include "wskp/train.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "wskp/errors.hpp"

namespace wskp {

namespace {

struct PatchRef {
    int frame = 0;
    int y = 0;
    int x = 0;
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : rng_(seed) {}
    // Uniform integer in [0, n).
    int below(int n)
    {
        return static_cast<int>(static_cast<double>(rng_() >> 11) * 0x1.0p-53 * n);
    }
    template <class T>
    void shuffle(std::vector<T>& v)
    {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[below(i + 1)]);
        }
    }

private:
    std::mt19937_64 rng_;
};

PreparedFrame crop_frame(const PreparedFrame& f, const PatchRef& p, int size)
{
    PreparedFrame out;
    out.frame_index = f.frame_index;
    out.packed = f.packed.crop(p.y, p.x, size, size);
    out.irradiance = f.irradiance.crop(p.y, p.x, size, size);
    out.albedo = f.albedo.crop(p.y, p.x, size, size);
    out.reference = f.reference.crop(p.y, p.x, size, size);
    return out;
}

Tensor multiply(const Tensor& a, const Tensor& b)
{
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.raw()[i] *= b.raw()[i];
    }
    return out;
}

// Loss of the filtered irradiance against the patch reference, plus the
// gradient with respect to the filtered irradiance.
LossResult patch_loss(const Tensor& filtered, const PreparedFrame& p, const TrainConfig& cfg)
{
    if (cfg.loss_space == LossSpace::irradiance) {
        return smape_loss(filtered, demodulate_albedo(p.reference, p.albedo, cfg.albedo_eps), cfg.loss_eps);
    }
    LossResult r = smape_loss(remodulate_albedo(filtered, p.albedo), p.reference, cfg.loss_eps);
    r.grad = multiply(r.grad, p.albedo);
    return r;
}

double evaluate_loss(const std::vector<PreparedFrame>& frames, const std::vector<PatchRef>& patches,
                     const NetworkParams& params, const TrainConfig& cfg)
{
    if (patches.empty()) {
        return 0.0;
    }
    const NetworkParams fused = reparameterize_network(params);
    double sum = 0.0;
    for (const PatchRef& ref : patches) {
        const PreparedFrame p = crop_frame(frames[ref.frame], ref, cfg.patch_size);
        const Tensor head = network_head(p.packed, fused, BlockMode::fused);
        sum += patch_loss(reconstruct(head, p.irradiance, cfg.net), p, cfg).loss;
    }
    return sum / static_cast<double>(patches.size());
}

} // namespace

void TrainConfig::validate() const
{
    net.validate();
    if (epochs < 0 || batch_size < 1 || patch_size < 1 || train_patches_per_frame < 1 ||
        val_patches_per_frame < 0) {
        throw ConfigError("training counts must be positive");
    }
    if (!(lr > 0.0f) || !(loss_eps > 0.0f) || !(gamma > 0.0f) || !(albedo_eps > 0.0f)) {
        throw ConfigError("lr, loss_eps, gamma and albedo_eps must be positive");
    }
    const int levels = net.levels();
    const int factor = 1 << (levels - 1);
    if (patch_size % factor != 0) {
        throw ConfigError("patch_size must be divisible by " + std::to_string(factor));
    }
    net.fusion.validate_for(patch_size / factor, patch_size / factor);
}

std::vector<PreparedFrame> prepare_sequence(const std::vector<FrameBundle>& frames,
                                            const TemporalConfig& temporal, float gamma,
                                            float albedo_eps)
{
    TemporalAccumulator acc(temporal);
    std::vector<PreparedFrame> out;
    out.reserve(frames.size());
    for (const FrameBundle& f : frames) {
        f.validate();
        const Tensor accum = temporal.enabled ? acc.process(f) : f.radiance;
        PreparedFrame p;
        p.frame_index = f.frame_index;
        p.packed = pack_inputs(f, accum, gamma);
        p.irradiance = demodulate_albedo(accum, f.albedo, albedo_eps);
        p.albedo = f.albedo;
        p.noisy = f.radiance;
        if (f.reference) {
            p.reference = *f.reference;
        }
        out.push_back(std::move(p));
    }
    return out;
}

TrainResult train(const std::vector<PreparedFrame>& frames, const TrainConfig& cfg,
                  const EpochCallback& on_epoch)
{
    cfg.validate();
    if (frames.empty()) {
        throw ConfigError("training needs at least one frame");
    }
    for (const PreparedFrame& f : frames) {
        if (f.reference.empty()) {
            throw ConfigError("training frame " + std::to_string(f.frame_index) + " has no reference");
        }
        if (f.packed.height() < cfg.patch_size || f.packed.width() < cfg.patch_size) {
            throw ConfigError("patch_size exceeds the frame dimensions");
        }
        if (f.packed.channels() != cfg.net.input_channels) {
            throw ConfigError("packed input has " + std::to_string(f.packed.channels()) +
                              " channels, network expects " + std::to_string(cfg.net.input_channels));
        }
    }

    Rng rng(cfg.seed);
    std::vector<PatchRef> train_patches;
    std::vector<PatchRef> val_patches;
    for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
        const int ny = frames[f].packed.height() - cfg.patch_size + 1;
        const int nx = frames[f].packed.width() - cfg.patch_size + 1;
        for (int i = 0; i < cfg.train_patches_per_frame; ++i) {
            const int y = rng.below(ny);
            train_patches.push_back({f, y, rng.below(nx)});
        }
        for (int i = 0; i < cfg.val_patches_per_frame; ++i) {
            const int y = rng.below(ny);
            val_patches.push_back({f, y, rng.below(nx)});
        }
    }

    TrainResult result;
    NetworkParams params = init_network(cfg.net, cfg.seed);
    AdamState adam = make_adam_state(params, AdamHyper{cfg.lr, 0.9f, 0.999f, 1e-8f});
    double best_val = std::numeric_limits<double>::infinity();

    auto record = [&](EpochStats stats) {
        result.curve.push_back(stats);
        const double score = val_patches.empty() ? stats.train_loss : stats.val_loss;
        if (score < best_val) {
            best_val = score;
            result.params = params;
            result.best_epoch = stats.epoch;
        }
        if (on_epoch) {
            on_epoch(stats);
        }
    };

    {
        const auto t0 = std::chrono::steady_clock::now();
        EpochStats s;
        s.epoch = 0;
        s.train_loss = evaluate_loss(frames, train_patches, params, cfg);
        s.val_loss = evaluate_loss(frames, val_patches, params, cfg);
        s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        record(s);
    }

    std::vector<PatchRef> order = train_patches;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            NetworkParams grads = zeros_like(params);
            for (std::size_t i = start; i < end; ++i) {
                const PreparedFrame p = crop_frame(frames[order[i].frame], order[i], cfg.patch_size);
                const NetworkTrace trace = network_forward_trace(p.packed, params);
                const Tensor filtered = reconstruct(trace.head, p.irradiance, cfg.net);
                const LossResult loss = patch_loss(filtered, p, cfg);
                loss_sum += loss.loss;
                const Tensor grad_head = reconstruct_backward(loss.grad, trace.head, p.irradiance, cfg.net);
                network_backward(trace, grad_head, params, grads);
            }
            const float scale = 1.0f / static_cast<float>(end - start);
            for_each_parameter(grads, [&](std::span<float> s) {
                for (float& g : s) {
                    g *= scale;
                }
            });
            adam_step(params, grads, adam);
        }
        EpochStats s;
        s.epoch = epoch;
        s.train_loss = loss_sum / static_cast<double>(order.size());
        s.val_loss = evaluate_loss(frames, val_patches, params, cfg);
        s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        record(s);
    }
    return result;
}

Tensor denoise_frame(const PreparedFrame& frame, const NetworkParams& params, BlockMode mode)
{
    const Tensor head = network_head(frame.packed, params, mode);
    return remodulate_albedo(reconstruct(head, frame.irradiance, params.config), frame.albedo);
}

void write_loss_curve(const TrainResult& result, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "epoch,train_smape,val_smape,seconds\n";
    char line[128];
    for (const EpochStats& s : result.curve) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.3f\n", s.epoch, s.train_loss, s.val_loss, s.seconds);
        out << line;
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace wskp
