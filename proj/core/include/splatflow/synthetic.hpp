// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Procedural dynamic scene: colored Gaussian blobs moving rigidly along
// smooth trajectories, observed by a ring of cameras.
//
#pragma once

#include "splatflow/scene.hpp"
#include "splatflow/types.hpp"

#include <cstdint>
#include <vector>

namespace splatflow {

struct SyntheticOptions {
    int width = 128;
    int height = 128;
    int frames = 60;
    int train_cameras = 8;
    int holdout_cameras = 2;
    double ring_radius = 4.0;
    /// Camera height above the ring plane, as a fraction of the radius.
    double elevation = 0.3;
    double focal = 150.0;
    int blobs = 3;
    int gaussians_per_blob = 24;
    /// Spread of the Gaussians around each blob center.
    double blob_radius = 0.18;
    double gaussian_scale = 0.07;
    double opacity = 0.85;
    /// Peak displacement of each blob along its trajectory.
    double motion_amplitude = 0.45;
    /// Random seed points added to the noisy ground-truth positions.
    int random_seeds = 200;
    double seed_noise = 0.03;
    std::uint64_t seed = 1;
};

struct SyntheticDataset {
    std::vector<Frame> train;
    std::vector<Frame> holdout;
    /// Static layout of every ground-truth Gaussian at t = 0 (curves unused).
    Scene ground_truth;
    /// Blob index of each ground-truth Gaussian.
    std::vector<int> blob_of;
    std::vector<SeedPoint> seeds;
    SyntheticOptions options;

    /// Ground-truth Gaussians moved to time t (a static scene).
    Scene ground_truth_at(double t) const;
    /// Translation of blob b at time t.
    Vec3 blob_offset(int b, double t) const;
};

/// Ring of cameras around the origin; every (holdout_cameras)-th slot of the
/// combined ring is held out so held-out views interleave training views.
std::vector<Camera> ring_cameras(const SyntheticOptions& options, std::vector<bool>& is_holdout);

/// Renders every camera at `frames` evenly spaced times in [0, 1] with the
/// reference renderer.
SyntheticDataset make_synthetic_blobs(const SyntheticOptions& options);

} // namespace splatflow
