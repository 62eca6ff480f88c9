#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wskp/bench.hpp"
#include "wskp/datagen.hpp"
#include "wskp/dataset.hpp"
#include "wskp/errors.hpp"
#include "wskp/image_io.hpp"
#include "wskp/metrics.hpp"
#include "wskp/model_io.hpp"
#include "wskp/parallel.hpp"
#include "wskp/preprocess.hpp"
#include "wskp/simd/kernels.hpp"
#include "wskp/train.hpp"

namespace fs = std::filesystem;
using namespace wskp;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Size {
    int width = 0;
    int height = 0;
};

std::optional<Size> parse_size(const std::string& s)
{
    int w = 0;
    int h = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%dx%d%c", &w, &h, &tail) != 2 || w <= 0 || h <= 0) {
        return std::nullopt;
    }
    return Size{w, h};
}

const auto kSizeCheck = CLI::Validator(
    [](std::string& s) { return parse_size(s) ? std::string{} : "expected WIDTHxHEIGHT, got '" + s + "'"; },
    "WxH");

void write_json(const nlohmann::json& j, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

TemporalConfig temporal_for(const fs::path& data, bool enabled)
{
    TemporalConfig t;
    t.enabled = enabled;
    t.pos_tol = static_cast<float>(0.01 * read_meta(data).scene_scale);
    return t;
}

struct DatagenArgs {
    std::string out;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> noise_seed;
    int frames = 8;
    std::string size = "256x256";
    std::string noise = "exp";
    int speed = 1;
    float texture_freq = 6.0f;
};

int run_datagen(const DatagenArgs& a)
{
    SceneConfig cfg;
    cfg.seed = a.seed;
    cfg.noise_seed = a.noise_seed;
    cfg.frames = a.frames;
    const Size s = *parse_size(a.size);
    cfg.width = s.width;
    cfg.height = s.height;
    cfg.noise_model = parse_noise_model(a.noise);
    cfg.camera_speed = a.speed;
    cfg.texture_freq = a.texture_freq;
    write_dataset(cfg, a.out);
    std::printf("wrote %d frames (%dx%d) to %s\n", cfg.frames, cfg.width, cfg.height, a.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string curve;
    int epochs = 50;
    std::string arch = "6layer";
    int kernels = 6;
    int kb = 3;
    int ks = 2;
    int width = 32;
    std::uint64_t seed = 1;
    int batch = 64;
    int patch = 128;
    int train_patches = 80;
    int val_patches = 20;
    float lr = 1e-3f;
    std::string loss = "radiance";
    int holdout = 1;
    bool no_temporal = false;
    bool quiet = false;
};

int run_train(const TrainArgs& a)
{
    TrainConfig cfg;
    if (a.arch == "6layer") {
        cfg.net = six_layer_config(a.width);
    } else if (a.arch == "3layer") {
        cfg.net = three_layer_config(a.width);
    } else {
        cfg.net = multires_config(a.width);
    }
    cfg.net.fusion = FusionConfig{a.kernels, a.kb, a.ks};
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.lr = a.lr;
    cfg.patch_size = a.patch;
    cfg.train_patches_per_frame = a.train_patches;
    cfg.val_patches_per_frame = a.val_patches;
    cfg.seed = a.seed;
    cfg.loss_space = a.loss == "irradiance" ? LossSpace::irradiance : LossSpace::radiance;
    cfg.validate();

    std::vector<FrameBundle> bundles = load_dataset(a.data);
    const std::vector<PreparedFrame> all = prepare_sequence(bundles, temporal_for(a.data, !a.no_temporal), cfg.gamma);
    if (a.holdout < 0 || a.holdout >= static_cast<int>(all.size())) {
        throw ConfigError("holdout must leave at least one training frame");
    }
    const std::vector<PreparedFrame> frames(all.begin(), all.end() - a.holdout);
    const TrainResult result = train(frames, cfg, [&](const EpochStats& s) {
        if (!a.quiet) {
            std::printf("epoch %3d  train %.6f  val %.6f  (%.1fs)\n", s.epoch, s.train_loss, s.val_loss, s.seconds);
            std::fflush(stdout);
        }
    });
    save_model(result.params, a.out);
    const fs::path curve = a.curve.empty() ? fs::path(a.out).parent_path() / "loss_curve.csv" : fs::path(a.curve);
    write_loss_curve(result, curve);

    nlohmann::json side;
    {
        std::ifstream in(sidecar_path(a.out));
        in >> side;
    }
    side["training"] = {{"data", a.data},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"lr", cfg.lr},
                        {"patch_size", cfg.patch_size},
                        {"train_patches_per_frame", cfg.train_patches_per_frame},
                        {"val_patches_per_frame", cfg.val_patches_per_frame},
                        {"seed", cfg.seed},
                        {"loss_space", a.loss},
                        {"loss_eps", cfg.loss_eps},
                        {"holdout_frames", a.holdout},
                        {"temporal", !a.no_temporal},
                        {"best_epoch", result.best_epoch}};
    write_json(side, sidecar_path(a.out));
    std::printf("best epoch %d, model written to %s\n", result.best_epoch, a.out.c_str());
    return 0;
}

struct DenoiseArgs {
    std::string model;
    std::string data;
    std::string out;
    bool no_temporal = false;
    bool fused = false;
    float gamma = 2.2f;
};

int run_denoise(const DenoiseArgs& a)
{
    NetworkParams params = load_model(a.model);
    BlockMode mode = BlockMode::multi_branch;
    if (a.fused) {
        if (!params.fully_fused()) {
            params = reparameterize_network(params);
        }
        mode = BlockMode::fused;
    }
    const std::vector<FrameBundle> bundles = load_dataset(a.data);
    const std::vector<PreparedFrame> frames =
        prepare_sequence(bundles, temporal_for(a.data, !a.no_temporal), a.gamma);
    for (const PreparedFrame& f : frames) {
        const Tensor out = denoise_frame(f, params, mode);
        const fs::path dir = frame_dir(a.out, f.frame_index);
        fs::create_directories(dir);
        write_pfm(out, dir / "denoised.pfm");
        write_png(tone_map(out, a.gamma), dir / "denoised.png");
    }
    write_json({{"model", a.model},
                {"data", a.data},
                {"temporal", !a.no_temporal},
                {"fused", a.fused},
                {"gamma", a.gamma},
                {"frames", frames.size()},
                {"network", config_to_json(params.config)}},
               fs::path(a.out) / "denoise.json");
    std::printf("denoised %zu frames into %s\n", frames.size(), a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string denoised;
    std::string reference;
    std::string out = "report.json";
    float gamma = 2.2f;
    std::string denoised_name = "denoised.pfm";
    std::string reference_name = "reference.pfm";
};

int run_eval(const EvalArgs& a)
{
    const MetricReport r = evaluate_sequence(a.denoised, a.reference, a.gamma, a.denoised_name, a.reference_name);
    nlohmann::json j = r.to_json();
    j["config"]["denoised"] = a.denoised;
    j["config"]["reference"] = a.reference;
    write_json(j, a.out);
    std::printf("%zu frames  psnr %.3f dB  ssim %.4f  smape %.5f\n", r.per_frame.size(), r.mean_psnr_db,
                r.mean_ssim, r.mean_smape);
    return 0;
}

struct BenchArgs {
    std::string sweep = "default";
    std::string out = "bench.csv";
    std::string size = "1280x720";
    int reps = 5;
};

int run_bench(const BenchArgs& a)
{
    const Size s = *parse_size(a.size);
    const std::vector<FusionConfig> sweep = default_sweep();
    const BenchResult r = bench_reconstruction(s.width, s.height, sweep, a.reps);
    write_bench_csv(r, a.out);
    fs::path side = a.out;
    side += ".json";
    write_json({{"sweep", a.sweep},
                {"width", s.width},
                {"height", s.height},
                {"reps", r.reps},
                {"threads", r.threads},
                {"isa", simd::isa_name(simd::active_isa())}},
               side);
    for (const BenchRow& row : r.rows) {
        std::printf("%-4s sizes %-18s %9.2f ms  peak aux %zu bytes\n", row.label.c_str(),
                    sizes_label(row.sizes).c_str(), row.wall_ms, row.peak_aux_bytes);
    }
    return 0;
}

struct ReparamArgs {
    std::string model;
    std::string out;
};

int run_reparam(const ReparamArgs& a)
{
    const NetworkParams params = load_model(a.model);
    save_model(reparameterize_network(params), a.out);
    std::printf("fused model written to %s\n", a.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Weight-sharing kernel-prediction denoiser"};
    app.require_subcommand(1);
    app.allow_config_extras(false);
    app.set_config("--config", "", "Read options from a key=value config file");
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (overrides WSKP_THREADS)")->check(CLI::NonNegativeNumber);

    DatagenArgs dg;
    auto* datagen = app.add_subcommand("datagen", "Generate a synthetic dataset");
    datagen->add_option("--out", dg.out, "Output directory")->required();
    datagen->add_option("--seed", dg.seed, "Scene seed");
    datagen->add_option("--noise-seed", dg.noise_seed, "Noise seed (defaults to --seed)");
    datagen->add_option("--frames", dg.frames, "Frame count")->check(CLI::PositiveNumber);
    datagen->add_option("--size", dg.size, "Frame size WxH")->check(kSizeCheck);
    datagen->add_option("--noise", dg.noise, "Noise model")->check(CLI::IsMember({"exp", "gauss"}));
    datagen->add_option("--speed", dg.speed, "Camera speed in pixels per frame");
    datagen->add_option("--texture-freq", dg.texture_freq, "Albedo texture cycles per image width")
        ->check(CLI::PositiveNumber);

    TrainArgs tr;
    auto* trainc = app.add_subcommand("train", "Train a model on a dataset");
    trainc->add_option("--data", tr.data, "Dataset directory")->required();
    trainc->add_option("--out", tr.out, "Model file")->required();
    trainc->add_option("--curve", tr.curve, "Loss curve CSV (default: loss_curve.csv next to the model)");
    trainc->add_option("--epochs", tr.epochs, "Epochs")->check(CLI::NonNegativeNumber);
    trainc->add_option("--arch", tr.arch, "Architecture")->check(CLI::IsMember({"6layer", "3layer", "mr"}));
    trainc->add_option("--kernels", tr.kernels, "Fused kernel count M")->check(CLI::PositiveNumber);
    trainc->add_option("--kb", tr.kb, "Base kernel size")->check(CLI::PositiveNumber);
    trainc->add_option("--ks", tr.ks, "Kernel size step")->check(CLI::NonNegativeNumber);
    trainc->add_option("--width", tr.width, "Channels per block")->check(CLI::PositiveNumber);
    trainc->add_option("--seed", tr.seed, "Seed for init and patch sampling");
    trainc->add_option("--batch", tr.batch, "Batch size")->check(CLI::PositiveNumber);
    trainc->add_option("--patch", tr.patch, "Patch size")->check(CLI::PositiveNumber);
    trainc->add_option("--train-patches", tr.train_patches, "Training patches per frame")->check(CLI::PositiveNumber);
    trainc->add_option("--val-patches", tr.val_patches, "Validation patches per frame")
        ->check(CLI::NonNegativeNumber);
    trainc->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    trainc->add_option("--loss", tr.loss, "Loss space")->check(CLI::IsMember({"radiance", "irradiance"}));
    trainc->add_option("--holdout", tr.holdout, "Trailing frames excluded from training")
        ->check(CLI::NonNegativeNumber);
    trainc->add_flag("--no-temporal", tr.no_temporal, "Skip temporal accumulation");
    trainc->add_flag("--quiet", tr.quiet, "Do not print per-epoch losses");

    DenoiseArgs dn;
    auto* denoise = app.add_subcommand("denoise", "Denoise every frame of a dataset");
    denoise->add_option("--model", dn.model, "Model file")->required()->check(CLI::ExistingFile);
    denoise->add_option("--data", dn.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    denoise->add_option("--out", dn.out, "Output directory")->required();
    denoise->add_flag("--no-temporal", dn.no_temporal, "Skip temporal accumulation");
    denoise->add_flag("--fused", dn.fused, "Run re-parameterized single-branch inference");
    denoise->add_option("--gamma", dn.gamma, "Tone-mapping gamma")->check(CLI::PositiveNumber);

    EvalArgs ev;
    auto* evalc = app.add_subcommand("eval", "Compute PSNR/SSIM/SMAPE against references");
    evalc->add_option("--denoised", ev.denoised, "Denoised directory")->required()->check(CLI::ExistingDirectory);
    evalc->add_option("--reference", ev.reference, "Reference directory")->required()->check(CLI::ExistingDirectory);
    evalc->add_option("--out", ev.out, "Report JSON");
    evalc->add_option("--gamma", ev.gamma, "Tone-mapping gamma")->check(CLI::PositiveNumber);
    evalc->add_option("--denoised-name", ev.denoised_name, "File name inside frame directories");
    evalc->add_option("--reference-name", ev.reference_name, "File name inside frame directories");

    BenchArgs bn;
    auto* benchc = app.add_subcommand("bench", "Time streaming reconstruction over kernel counts");
    benchc->add_option("--sweep", bn.sweep, "Sweep name")->check(CLI::IsMember({"default"}));
    benchc->add_option("--out", bn.out, "CSV output");
    benchc->add_option("--size", bn.size, "Frame size WxH")->check(kSizeCheck);
    benchc->add_option("--reps", bn.reps, "Timed repetitions (>= 5)")->check(CLI::Range(5, 1000));

    ReparamArgs rp;
    auto* reparam = app.add_subcommand("reparam", "Fold RepVGG branches into single 5x5 convolutions");
    reparam->add_option("--model", rp.model, "Input model")->required()->check(CLI::ExistingFile);
    reparam->add_option("--out", rp.out, "Output model")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (threads > 0) {
            set_thread_count(threads);
        }
        if (*datagen) {
            return run_datagen(dg);
        }
        if (*trainc) {
            return run_train(tr);
        }
        if (*denoise) {
            return run_denoise(dn);
        }
        if (*evalc) {
            return run_eval(ev);
        }
        if (*benchc) {
            return run_bench(bn);
        }
        if (*reparam) {
            return run_reparam(rp);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
