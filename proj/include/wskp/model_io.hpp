#pragma once

#include <filesystem>

#include <json.hpp>

#include "wskp/network.hpp"

namespace wskp {

inline constexpr std::uint32_t kModelVersion = 1;

// Binary model file: "WSKP", u32 version, config block, per-block layout
// flags, then little-endian float32 parameters in for_each_parameter order.
// A JSON copy of the config is written next to it as <path>.json.
void save_model(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_model(const std::filesystem::path& path);

nlohmann::json config_to_json(const NetworkConfig& cfg);

std::filesystem::path sidecar_path(const std::filesystem::path& model_path);

} // namespace wskp
