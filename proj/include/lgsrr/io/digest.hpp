#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lgsrr::io {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace lgsrr::io
