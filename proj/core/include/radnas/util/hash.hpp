#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace radnas::util {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
std::string read_file(const std::filesystem::path& path);

}  // namespace radnas::util
