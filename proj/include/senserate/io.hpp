#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace senserate {

/// Stamp attached to every artifact the tools write.
struct ArtifactStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename(2), so readers see either the
/// old content or the new content, never a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

bool is_valid_utf8(std::string_view text);

}  // namespace senserate
