// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthdiff/data.hpp"

namespace depthdiff {

inline constexpr double kDefaultDepthScale = 0.1;  // mm per 16-bit unit

struct DepthMeta {
    double scale_mm_per_unit = kDefaultDepthScale;
    DepthRange range;
    std::string extra_json = "{}";  // free-form provenance (config, seeds)
};

/// Raw 16-bit grayscale PNG, row-major.
void write_png16(const std::filesystem::path& path, const std::vector<std::uint16_t>& pixels,
                 int height, int width);
std::vector<std::uint16_t> read_png16(const std::filesystem::path& path, int& height, int& width);

/// 8-bit RGB PNG from / to a (1, 3, H, W) tensor in [0, 1].
void write_png_rgb(const std::filesystem::path& path, const Tensor& image);
Tensor read_png_rgb(const std::filesystem::path& path);

/// Path of the metadata file accompanying a depth image: same stem, ".json".
std::filesystem::path sidecar_path(const std::filesystem::path& depth_path);

/// Depth as 16-bit PNG (raw 0 = invalid) plus its JSON sidecar.
void save_depth(const DepthMap& depth, const std::filesystem::path& path,
                const DepthMeta& meta = {});
DepthMap load_depth(const std::filesystem::path& path, DepthMeta* meta = nullptr);

struct ManifestEntry {
    std::string id;
    std::filesystem::path image;  // resolved against the manifest directory
    std::filesystem::path depth;
};

/// Tab-separated (id, image_path, depth_path); '#' starts a comment line.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Loads image and depth of one entry; the sparse map is left empty.
Sample load_sample(const ManifestEntry& entry);
/// Every entry of a manifest, in manifest order. Checks that ids are unique
/// and every file exists before decoding anything.
std::vector<Sample> load_split(const std::filesystem::path& manifest);

}  // namespace depthdiff
