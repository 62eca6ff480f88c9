#include "wskp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "wskp/dataset.hpp"
#include "wskp/errors.hpp"
#include "wskp/parallel.hpp"

namespace wskp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Scene units per pixel.
constexpr double kUnit = 1.0 / 64.0;
constexpr double kHeightMin = -0.45;
constexpr double kHeightMax = 1.25;

class Uniform {
public:
    explicit Uniform(std::seed_seq& seq) : rng_(seq) {}
    double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + (hi - lo) * (*this)(); }

private:
    std::mt19937_64 rng_;
};

struct Rect {
    double u0, v0, u1, v1, value;
    bool contains(double u, double v) const { return u >= u0 && u < u1 && v >= v0 && v < v1; }
};

struct Lobe {
    double cu, cv, sigma, intensity;
    double l[3];
    double tint[3];
};

struct Scene {
    double extent_u = 0.0;
    double extent_v = 0.0;
    double freq = 6.0;
    double width = 256.0;
    double p1, p2, p3, ph1, ph2, ph3;
    std::vector<Rect> plateaus;
    std::vector<Rect> shadows;
    std::vector<Lobe> lobes;
    double albedo_phase[3][2];

    explicit Scene(const SceneConfig& cfg)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          0x5ce7eu};
        Uniform uni(seq);
        extent_u = cfg.width + static_cast<double>(std::abs(cfg.camera_speed)) * (cfg.frames - 1);
        extent_v = cfg.height;
        width = cfg.width;
        freq = cfg.texture_freq;
        p1 = uni.range(70, 140);
        p2 = uni.range(60, 120);
        p3 = uni.range(90, 180);
        ph1 = uni.range(0, kTwoPi);
        ph2 = uni.range(0, kTwoPi);
        ph3 = uni.range(0, kTwoPi);
        const double area_scale = extent_u * extent_v / (256.0 * 256.0);
        const int n_plateaus = std::max(3, static_cast<int>(std::lround(5 * area_scale)));
        for (int i = 0; i < n_plateaus; ++i) {
            const double w = uni.range(24, 72);
            const double h = uni.range(24, 72);
            const double u = uni.range(-w / 2, extent_u - w / 2);
            const double v = uni.range(-h / 2, extent_v - h / 2);
            plateaus.push_back({u, v, u + w, v + h, uni.range(0.35, 0.8)});
        }
        const int n_shadows = std::max(2, static_cast<int>(std::lround(4 * area_scale)));
        for (int i = 0; i < n_shadows; ++i) {
            const double w = uni.range(20, 60);
            const double h = uni.range(20, 60);
            const double u = uni.range(0, extent_u - w);
            const double v = uni.range(0, extent_v - h);
            shadows.push_back({u, v, u + w, v + h, 0.15});
        }
        const int n_lobes = 3 + static_cast<int>(uni() * 3.0);
        for (int i = 0; i < n_lobes; ++i) {
            Lobe lobe{};
            lobe.cu = uni.range(0, extent_u);
            lobe.cv = uni.range(0, extent_v);
            lobe.sigma = uni.range(45, 110) * std::sqrt(area_scale);
            lobe.intensity = uni.range(1.0, 3.0);
            const double theta = uni.range(0, kTwoPi);
            const double elev = uni.range(0.45, 1.0);
            const double horiz = std::sqrt(1.0 - elev * elev);
            lobe.l[0] = horiz * std::cos(theta);
            lobe.l[1] = elev;
            lobe.l[2] = horiz * std::sin(theta);
            for (double& t : lobe.tint) {
                t = uni.range(0.6, 1.0);
            }
            lobes.push_back(lobe);
        }
        for (auto& p : albedo_phase) {
            p[0] = uni.range(0, kTwoPi);
            p[1] = uni.range(0, kTwoPi);
        }
    }

    // Smooth part of the heightfield with its (u, v) derivatives.
    void smooth(double u, double v, double& h, double& hu, double& hv) const
    {
        const double a = kTwoPi * u / p1 + ph1;
        const double b = kTwoPi * v / p2 + ph2;
        const double c = kTwoPi * (u + v) / p3 + ph3;
        h = 0.25 * std::sin(a) * std::sin(b) + 0.15 * std::sin(c);
        hu = 0.25 * std::cos(a) * std::sin(b) * kTwoPi / p1 + 0.15 * std::cos(c) * kTwoPi / p3;
        hv = 0.25 * std::sin(a) * std::cos(b) * kTwoPi / p2 + 0.15 * std::cos(c) * kTwoPi / p3;
    }

    double height(double u, double v, double& hu, double& hv) const
    {
        double h = 0.0;
        smooth(u, v, h, hu, hv);
        double plateau = 0.0;
        for (const Rect& r : plateaus) {
            if (r.contains(u, v)) {
                plateau = std::max(plateau, r.value);
            }
        }
        return h + plateau;
    }

    double albedo(double u, double v, int c) const
    {
        const double f = freq / width;
        const double wave =
            std::sin(kTwoPi * f * u + albedo_phase[c][0]) * std::cos(kTwoPi * f * v + albedo_phase[c][1]);
        const long cu = static_cast<long>(std::floor(u * 2.0 * f));
        const long cv = static_cast<long>(std::floor(v * 2.0 * f));
        const double checker = ((cu + cv + c) & 1) ? 1.0 : -1.0;
        const double t = 0.5 + 0.3 * wave + 0.2 * checker;
        return 0.05 + 0.95 * std::clamp(t, 0.0, 1.0);
    }

    double shadow(double u, double v) const
    {
        for (const Rect& r : shadows) {
            if (r.contains(u, v)) {
                return r.value;
            }
        }
        return 1.0;
    }
};

} // namespace

const char* noise_model_name(NoiseModel model)
{
    return model == NoiseModel::exponential ? "exponential" : "gaussian";
}

NoiseModel parse_noise_model(const std::string& text)
{
    if (text == "exp" || text == "exponential") {
        return NoiseModel::exponential;
    }
    if (text == "gauss" || text == "gaussian") {
        return NoiseModel::gaussian;
    }
    throw ConfigError("unknown noise model '" + text + "' (expected exp or gauss)");
}

void SceneConfig::validate() const
{
    if (width < 64 || height < 64) {
        throw ConfigError("scene dimensions must be at least 64x64");
    }
    if (frames < 1) {
        throw ConfigError("scene needs at least one frame");
    }
    if (!(texture_freq > 0.0f)) {
        throw ConfigError("texture_freq must be positive");
    }
}

FrameBundle render_clean(const SceneConfig& cfg, int frame_index)
{
    cfg.validate();
    if (frame_index < 0 || frame_index >= cfg.frames) {
        throw ConfigError("frame index " + std::to_string(frame_index) + " out of range");
    }
    const Scene scene(cfg);
    const int h = cfg.height;
    const int w = cfg.width;
    FrameBundle b;
    b.frame_index = frame_index;
    b.albedo = Tensor(h, w, 3);
    b.normal = Tensor(h, w, 3);
    b.depth = Tensor(h, w, 1);
    b.world_pos = Tensor(h, w, 3);
    b.motion = Tensor(h, w, 2);
    Tensor reference(h, w, 3);
    // Content at column x of frame f shows world column x + speed * f, so the
    // previous frame saw this point at x + speed.
    const double shift = static_cast<double>(cfg.camera_speed) * frame_index;
    const double offset = cfg.camera_speed < 0 ? -static_cast<double>(cfg.camera_speed) * (cfg.frames - 1) : 0.0;
    parallel_for(0, h, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                const double u = x + shift + offset;
                const double v = y;
                double hu = 0.0;
                double hv = 0.0;
                const double hgt = scene.height(u, v, hu, hv);
                double n[3] = {-hu / kUnit, 1.0, -hv / kUnit};
                const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
                for (double& c : n) {
                    c /= len;
                }
                double irr[3] = {0.15, 0.15, 0.15};
                for (const Lobe& lobe : scene.lobes) {
                    const double du = u - lobe.cu;
                    const double dv = v - lobe.cv;
                    const double g = std::exp(-(du * du + dv * dv) / (2.0 * lobe.sigma * lobe.sigma));
                    const double ndl = std::max(0.0, n[0] * lobe.l[0] + n[1] * lobe.l[1] + n[2] * lobe.l[2]);
                    for (int c = 0; c < 3; ++c) {
                        irr[c] += lobe.intensity * g * ndl * lobe.tint[c];
                    }
                }
                const double occ = scene.shadow(u, v);
                float* alb = b.albedo.pixel(y, x);
                float* ref = reference.pixel(y, x);
                float* nrm = b.normal.pixel(y, x);
                float* pos = b.world_pos.pixel(y, x);
                for (int c = 0; c < 3; ++c) {
                    alb[c] = static_cast<float>(scene.albedo(u, v, c));
                    ref[c] = static_cast<float>(alb[c] * irr[c] * occ);
                    nrm[c] = static_cast<float>(0.5 * (n[c] + 1.0));
                }
                pos[0] = static_cast<float>(u * kUnit);
                pos[1] = static_cast<float>(hgt);
                pos[2] = static_cast<float>(v * kUnit);
                b.depth.at(y, x, 0) =
                    static_cast<float>(std::clamp((kHeightMax - hgt) / (kHeightMax - kHeightMin), 0.0, 1.0));
                b.motion.at(y, x, 0) = static_cast<float>(cfg.camera_speed);
                b.motion.at(y, x, 1) = 0.0f;
            }
        }
    });
    b.radiance = reference;
    b.reference = std::move(reference);
    return b;
}

Tensor apply_noise(const Tensor& reference, NoiseModel model, std::uint64_t noise_seed,
                   std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(noise_seed), static_cast<std::uint32_t>(noise_seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x4015eu};
    Uniform uni(seq);
    Tensor out = reference;
    const int c = reference.channels();
    const std::size_t n = reference.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        double s = 1.0;
        if (model == NoiseModel::exponential) {
            s = -std::log1p(-uni());
        } else {
            // Box-Muller; the symmetric clamp keeps the mean at exactly 1.
            const double u1 = 1.0 - uni();
            const double u2 = uni();
            const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
            s = 1.0 + 0.5 * std::clamp(g, -2.0, 2.0);
        }
        float* px = out.raw() + p * c;
        for (int k = 0; k < c; ++k) {
            px[k] = static_cast<float>(px[k] * s);
        }
    }
    return out;
}

FrameBundle generate_frame(const SceneConfig& cfg, int frame_index)
{
    FrameBundle b = render_clean(cfg, frame_index);
    b.radiance = apply_noise(*b.reference, cfg.noise_model, cfg.effective_noise_seed(),
                             static_cast<std::uint64_t>(frame_index));
    return b;
}

double scene_scale(const SceneConfig& cfg)
{
    cfg.validate();
    const Scene scene(cfg);
    const int cols = static_cast<int>(scene.extent_u);
    double lo = 1e30;
    double hi = -1e30;
    for (int v = 0; v < cfg.height; ++v) {
        for (int u = 0; u < cols; ++u) {
            double hu = 0.0;
            double hv = 0.0;
            const double h = scene.height(u, v, hu, hv);
            lo = std::min(lo, h);
            hi = std::max(hi, h);
        }
    }
    const double dx = (cols - 1) * kUnit;
    const double dz = (cfg.height - 1) * kUnit;
    const double dy = hi - lo;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void write_dataset(const SceneConfig& cfg, const std::filesystem::path& out_dir)
{
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    for (int f = 0; f < cfg.frames; ++f) {
        write_frame(generate_frame(cfg, f), out_dir);
    }
    DatasetMeta meta;
    meta.seed = cfg.seed;
    meta.noise_seed = cfg.effective_noise_seed();
    meta.width = cfg.width;
    meta.height = cfg.height;
    meta.frames = cfg.frames;
    meta.noise_model = noise_model_name(cfg.noise_model);
    meta.camera_speed = cfg.camera_speed;
    meta.scene_scale = scene_scale(cfg);
    write_meta(meta, out_dir);
}

} // namespace wskp
