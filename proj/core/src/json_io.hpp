#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace aicl::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

json parse_json_file(const std::filesystem::path& path);

}  // namespace aicl::io
