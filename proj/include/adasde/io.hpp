#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adasde/types.hpp"

namespace adasde {

/// Shortest decimal string that round-trips the exact double value.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

/// PointCloud CSV: one "x,y" row per point, full precision, no header.
std::string cloud_to_csv(const PointCloud& cloud);
PointCloud cloud_from_csv(const std::string& csv);
void save_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud load_cloud_csv(const std::filesystem::path& path);

/// FNV-1a over bytes; used for config hashes in manifests.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(const std::string& bytes);

}  // namespace adasde
