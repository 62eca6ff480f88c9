#include "wskp/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "wskp/errors.hpp"
#include "wskp/image_io.hpp"

namespace wskp {

namespace fs = std::filesystem;

fs::path frame_dir(const fs::path& root, int frame_index)
{
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d", frame_index);
    return root / name;
}

void write_meta(const DatasetMeta& meta, const fs::path& root)
{
    nlohmann::json j;
    j["seed"] = meta.seed;
    j["noise_seed"] = meta.noise_seed;
    j["width"] = meta.width;
    j["height"] = meta.height;
    j["frames"] = meta.frames;
    j["noise_model"] = meta.noise_model;
    j["camera_speed"] = meta.camera_speed;
    j["scene_scale"] = meta.scene_scale;
    std::ofstream out(root / "meta.json");
    if (!out) {
        throw IoError("cannot write " + (root / "meta.json").string());
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("write failed for " + (root / "meta.json").string());
    }
}

DatasetMeta read_meta(const fs::path& root)
{
    const fs::path path = root / "meta.json";
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
        DatasetMeta meta;
        meta.frames = j.at("frames").get<int>();
        meta.width = j.value("width", 0);
        meta.height = j.value("height", 0);
        meta.seed = j.value("seed", std::uint64_t{0});
        meta.noise_seed = j.value("noise_seed", meta.seed);
        meta.noise_model = j.value("noise_model", std::string{});
        meta.camera_speed = j.value("camera_speed", 0);
        meta.scene_scale = j.value("scene_scale", 1.0);
        if (meta.frames < 1) {
            throw ParseError(path.string() + ": frames must be positive");
        }
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_frame(const FrameBundle& frame, const fs::path& root)
{
    frame.validate();
    const fs::path dir = frame_dir(root, frame.frame_index);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    write_pfm(frame.radiance, dir / "color.pfm");
    write_pfm(frame.albedo, dir / "albedo.pfm");
    write_pfm(frame.normal, dir / "normal.pfm");
    write_pfm(frame.world_pos, dir / "world_pos.pfm");
    write_pfm(frame.depth, dir / "depth.pfm");
    if (frame.reference) {
        write_pfm(*frame.reference, dir / "reference.pfm");
    }
    Tensor motion(frame.height(), frame.width(), 3);
    for (std::size_t p = 0; p < frame.motion.pixel_count(); ++p) {
        motion.raw()[p * 3] = frame.motion.raw()[p * 2];
        motion.raw()[p * 3 + 1] = frame.motion.raw()[p * 2 + 1];
    }
    write_pfm(motion, dir / "motion.pfm");
}

FrameBundle load_frame(const fs::path& root, int frame_index)
{
    const fs::path dir = frame_dir(root, frame_index);
    FrameBundle b;
    b.frame_index = frame_index;
    b.radiance = read_pfm(dir / "color.pfm");
    b.albedo = read_pfm(dir / "albedo.pfm");
    b.normal = read_pfm(dir / "normal.pfm");
    b.world_pos = read_pfm(dir / "world_pos.pfm");
    b.depth = read_pfm(dir / "depth.pfm");
    const Tensor motion = read_pfm(dir / "motion.pfm");
    if (motion.channels() != 3) {
        throw DimensionError(dir.string() + "/motion.pfm must have 3 channels");
    }
    b.motion = Tensor(motion.height(), motion.width(), 2);
    for (std::size_t p = 0; p < motion.pixel_count(); ++p) {
        b.motion.raw()[p * 2] = motion.raw()[p * 3];
        b.motion.raw()[p * 2 + 1] = motion.raw()[p * 3 + 1];
    }
    if (fs::exists(dir / "reference.pfm")) {
        b.reference = read_pfm(dir / "reference.pfm");
    }
    b.validate();
    return b;
}

std::vector<FrameBundle> load_dataset(const fs::path& root)
{
    const DatasetMeta meta = read_meta(root);
    std::vector<FrameBundle> frames;
    frames.reserve(meta.frames);
    for (int f = 0; f < meta.frames; ++f) {
        frames.push_back(load_frame(root, f));
    }
    return frames;
}

} // namespace wskp
