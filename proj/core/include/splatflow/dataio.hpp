// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Dataset manifests, PNG/NPY images and binary PLY point clouds. Every format
// is specified in docs/formats.md.
//
#pragma once

#include "splatflow/scene.hpp"
#include "splatflow/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace splatflow {

/// 8-bit (or 16-bit, reduced to 8-bit) gray/RGB/RGBA PNG, decoded to [0, 1] RGB.
Image read_png(const std::filesystem::path& path);
/// 8-bit RGB; values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

/// NPY v1.0, little-endian float32, C order, shape (height, width, 3).
void write_npy(const std::filesystem::path& path, const Image& image);

/// Binary little-endian PLY with x/y/z of any scalar type and optional
/// red/green/blue vertex properties. Other scalar vertex properties are skipped. Errors
/// report the byte offset of the problem.
std::vector<SeedPoint> read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, std::span<const SeedPoint> points);

/// Deformed point cloud at time t: x y z (float), red green blue (uchar) from
/// the deformed DC color, opacity (float).
void export_ply(const Scene& scene, double t, const std::filesystem::path& path);

struct Dataset {
    std::vector<Frame> train;
    std::vector<Frame> holdout;
    std::vector<SeedPoint> seeds;
    bool seeds_from_ply = false;
    /// Distinct normalized timestamps over every frame.
    int frame_count = 1;
    std::vector<std::string> warnings;
};

inline constexpr int kFallbackSeedCount = 10000;

/// Reads `dir/manifest.json`. Timestamps are normalized to [0, 1] jointly over
/// all frames; a constant timestamp maps to 0 with a warning. Without a point
/// cloud, kFallbackSeedCount uniform random seeds are drawn (seeded by `seed`)
/// inside the bounding box of the camera centers.
Dataset load_dataset(const std::filesystem::path& dir, std::uint64_t seed = 0, int threads = 0);

/// Camera JSON as used in manifests and by `splatflow render`.
Camera camera_from_json(std::string_view text);
std::string camera_to_json(const Camera& cam);

/// Writes PNG frames, points.ply and manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, std::span<const Frame> train, std::span<const Frame> holdout,
                   std::span<const SeedPoint> seeds);

} // namespace splatflow
