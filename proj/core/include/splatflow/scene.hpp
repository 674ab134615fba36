// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatflow/config.hpp"
#include "splatflow/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace splatflow {

struct SeedPoint {
    Vec3 position = Vec3::Zero();
    /// RGB in [0, 1].
    Vec3 color = Vec3::Constant(0.5);
};

/// Static Gaussians at the seed positions: identity rotation, isotropic scale
/// from the mean distance to the three nearest seeds, opacity
/// config.init_opacity, DC color from the seed color, all curves zero and an
/// identity time dilation.
Scene new_scene_from_points(std::span<const SeedPoint> seeds, const TrainConfig& config, int frame_count = 1);

/// SH DC coefficient that reproduces `rgb` under the +0.5 color offset.
Vec3 rgb_to_sh_dc(const Vec3& rgb);

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    Scene scene;
    TrainConfig config;
};

/// Binary layout documented in docs/formats.md.
std::vector<std::uint8_t> serialize_checkpoint(const Scene& scene, const TrainConfig& config);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Scene& scene, const TrainConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace splatflow
