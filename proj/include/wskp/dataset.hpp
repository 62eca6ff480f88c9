#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wskp/preprocess.hpp"

namespace wskp {

// Contents of meta.json at the dataset root.
struct DatasetMeta {
    std::uint64_t seed = 0;
    std::uint64_t noise_seed = 0;
    int width = 0;
    int height = 0;
    int frames = 0;
    std::string noise_model;
    int camera_speed = 0;
    double scene_scale = 1.0;
};

std::filesystem::path frame_dir(const std::filesystem::path& root, int frame_index);

void write_meta(const DatasetMeta& meta, const std::filesystem::path& root);
DatasetMeta read_meta(const std::filesystem::path& root);

// color, albedo, normal, world_pos, reference (when present), depth and
// motion (stored with a zero third channel).
void write_frame(const FrameBundle& frame, const std::filesystem::path& root);

// Loads one frame; reference.pfm is optional.
FrameBundle load_frame(const std::filesystem::path& root, int frame_index);

// Loads meta.frames frames in order.
std::vector<FrameBundle> load_dataset(const std::filesystem::path& root);

} // namespace wskp
