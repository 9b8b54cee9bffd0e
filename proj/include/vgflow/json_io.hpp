#pragma once

#include <filesystem>

#include <json.hpp>

namespace vgflow {

// Doubles are written in shortest round-trip form, so a read after a write
// reproduces every value bit for bit.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace vgflow
