#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbaug/network.hpp"

namespace lbaug {

inline constexpr int kCheckpointVersion = 1;

// Base64 of the little-endian float64 representation.
std::string encode_doubles(const std::vector<double>& values);
std::vector<double> decode_doubles(const std::string& text);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

void save_network(const Network& net, const std::filesystem::path& file);
Network load_network(const std::filesystem::path& file);

nlohmann::json specs_to_json(const std::vector<LayerSpec>& specs);
std::vector<LayerSpec> specs_from_json(const nlohmann::json& j);

}  // namespace lbaug
