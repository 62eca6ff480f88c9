#include "wskp/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "wskp/errors.hpp"

namespace wskp {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'W', 'S', 'K', 'P'};
constexpr std::uint32_t kMaxCount = 1u << 16;

constexpr std::uint32_t kIdentity = 1;
constexpr std::uint32_t kBranches = 2;
constexpr std::uint32_t kFused = 4;

class Writer {
public:
    explicit Writer(const fs::path& path) : out_(path, std::ios::binary), path_(path)
    {
        if (!out_) {
            throw IoError("cannot open " + path.string() + " for writing");
        }
    }
    void u32(std::uint32_t v)
    {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        out_.write(reinterpret_cast<const char*>(b), 4);
    }
    void floats(std::span<const float> values)
    {
        for (float f : values) {
            u32(std::bit_cast<std::uint32_t>(f));
        }
    }
    void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
    void finish()
    {
        out_.flush();
        if (!out_) {
            throw IoError("write failed for " + path_.string());
        }
    }

private:
    std::ofstream out_;
    fs::path path_;
};

class Reader {
public:
    explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path)
    {
        if (!in_) {
            throw IoError("cannot open " + path.string());
        }
    }
    std::uint32_t u32()
    {
        unsigned char b[4];
        in_.read(reinterpret_cast<char*>(b), 4);
        if (in_.gcount() != 4) {
            throw IoError(path_.string() + ": truncated model file");
        }
        return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint32_t count(const char* what)
    {
        const std::uint32_t v = u32();
        if (v == 0 || v > kMaxCount) {
            throw ParseError(path_.string() + ": implausible " + what + " " + std::to_string(v));
        }
        return v;
    }
    void floats(std::span<float> values)
    {
        for (float& f : values) {
            f = std::bit_cast<float>(u32());
        }
    }
    void raw(char* p, std::size_t n)
    {
        in_.read(p, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw IoError(path_.string() + ": truncated model file");
        }
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
    const fs::path& path() const { return path_; }

private:
    std::ifstream in_;
    fs::path path_;
};

} // namespace

fs::path sidecar_path(const fs::path& model_path)
{
    fs::path p = model_path;
    p += ".json";
    return p;
}

nlohmann::json config_to_json(const NetworkConfig& cfg)
{
    return {{"arch", architecture_name(cfg.arch)},
            {"input_channels", cfg.input_channels},
            {"widths", cfg.widths},
            {"kernel_count", cfg.fusion.kernel_count},
            {"base_size", cfg.fusion.base_size},
            {"step", cfg.fusion.step},
            {"kernel_sizes", cfg.fusion.sizes()},
            {"head_ksize", cfg.head_ksize},
            {"levels", cfg.levels()},
            {"head_channels", cfg.head_channels()}};
}

void save_model(const NetworkParams& params, const fs::path& path)
{
    const NetworkConfig& cfg = params.config;
    if (params.blocks.size() != cfg.widths.size()) {
        throw StateError("network has " + std::to_string(params.blocks.size()) + " blocks but config lists " +
                         std::to_string(cfg.widths.size()));
    }
    Writer w(path);
    w.raw(kMagic, 4);
    w.u32(kModelVersion);
    w.u32(static_cast<std::uint32_t>(cfg.arch));
    w.u32(static_cast<std::uint32_t>(cfg.input_channels));
    w.u32(static_cast<std::uint32_t>(cfg.widths.size()));
    for (int width : cfg.widths) {
        w.u32(static_cast<std::uint32_t>(width));
    }
    w.u32(static_cast<std::uint32_t>(cfg.fusion.kernel_count));
    w.u32(static_cast<std::uint32_t>(cfg.fusion.base_size));
    w.u32(static_cast<std::uint32_t>(cfg.fusion.step));
    w.u32(static_cast<std::uint32_t>(cfg.head_ksize));
    w.u32(static_cast<std::uint32_t>(cfg.levels()));
    for (const RepVggBlockParams& b : params.blocks) {
        std::uint32_t flags = 0;
        flags |= b.use_identity ? kIdentity : 0u;
        flags |= b.has_branches ? kBranches : 0u;
        flags |= b.fused ? kFused : 0u;
        w.u32(flags);
    }
    for_each_parameter(params, [&](std::span<const float> s) { w.floats(s); });
    w.finish();

    nlohmann::json j;
    j["format"] = "WSKP";
    j["version"] = kModelVersion;
    j["config"] = config_to_json(cfg);
    j["fused"] = params.fully_fused();
    j["parameter_count"] = params.parameter_count();
    std::ofstream side(sidecar_path(path));
    if (!side) {
        throw IoError("cannot write " + sidecar_path(path).string());
    }
    side << j.dump(2) << '\n';
}

NetworkParams load_model(const fs::path& path)
{
    Reader r(path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError(path.string() + ": not a WSKP model file");
    }
    const std::uint32_t version = r.u32();
    if (version != kModelVersion) {
        throw ParseError(path.string() + ": unsupported model version " + std::to_string(version));
    }
    NetworkConfig cfg;
    const std::uint32_t arch = r.u32();
    if (arch > static_cast<std::uint32_t>(Architecture::multires)) {
        throw ParseError(path.string() + ": unknown architecture id " + std::to_string(arch));
    }
    cfg.arch = static_cast<Architecture>(arch);
    cfg.input_channels = static_cast<int>(r.count("input channel count"));
    const std::uint32_t blocks = r.count("block count");
    cfg.widths.clear();
    for (std::uint32_t i = 0; i < blocks; ++i) {
        cfg.widths.push_back(static_cast<int>(r.count("block width")));
    }
    cfg.fusion.kernel_count = static_cast<int>(r.count("kernel count"));
    cfg.fusion.base_size = static_cast<int>(r.count("base size"));
    cfg.fusion.step = static_cast<int>(r.u32());
    cfg.head_ksize = static_cast<int>(r.count("head kernel size"));
    const std::uint32_t levels = r.u32();
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (levels != static_cast<std::uint32_t>(cfg.levels())) {
        throw ParseError(path.string() + ": level count does not match the architecture");
    }

    NetworkParams params;
    params.config = cfg;
    int in_ch = cfg.input_channels;
    for (int width : cfg.widths) {
        const std::uint32_t flags = r.u32();
        RepVggBlockParams b;
        b.use_identity = (flags & kIdentity) != 0;
        b.has_branches = (flags & kBranches) != 0;
        if (!b.has_branches && !(flags & kFused)) {
            throw ParseError(path.string() + ": block without branches or fused conv");
        }
        if (b.use_identity && in_ch != width) {
            throw ParseError(path.string() + ": identity branch on a block that changes width");
        }
        if (b.has_branches) {
            b.conv1x1 = ConvParams::zeros(width, in_ch, 1);
            b.conv3x3 = ConvParams::zeros(width, in_ch, 3);
            b.conv5x5 = ConvParams::zeros(width, in_ch, 5);
        }
        if (flags & kFused) {
            b.fused = ConvParams::zeros(width, in_ch, 5);
        }
        params.blocks.push_back(std::move(b));
        in_ch = width;
    }
    params.head = ConvParams::zeros(cfg.head_channels(), in_ch, cfg.head_ksize);
    for_each_parameter(params, [&](std::span<float> s) { r.floats(s); });
    if (!r.at_end()) {
        throw ParseError(path.string() + ": trailing bytes after parameter payload");
    }
    return params;
}

} // namespace wskp
