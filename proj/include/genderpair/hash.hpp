#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace genderpair {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

// Lowercase hex SHA-256 of a file's contents. Throws Error(MissingFile) if unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

}  // namespace genderpair
