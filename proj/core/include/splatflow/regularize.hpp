// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Motion regularizers: temporal smoothness of the deformation residuals and
// local rigidity between spatial neighbours.
//
#pragma once

#include "splatflow/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splatflow {

struct KnnIndex {
    int k = 0;
    /// neighbors[i * k + j] is the j-th nearest neighbour of point i.
    std::vector<std::uint32_t> neighbors;
    int built_at = 0;

    std::size_t point_count() const { return k == 0 ? 0 : neighbors.size() / std::size_t(k); }
    std::span<const std::uint32_t> of(std::size_t i) const {
        return std::span<const std::uint32_t>(neighbors).subspan(i * std::size_t(k), std::size_t(k));
    }
};

/// Exact K nearest neighbours by base position, ties broken by lower index.
KnnIndex build_knn(const Scene& scene, int k, int iteration = 0);
KnnIndex build_knn(std::span<const Vec3> positions, int k, int iteration = 0);

/// epsilon = 0.1 / frame_count.
double time_smooth_epsilon(const Scene& scene);

/// Mean over points of || D(t) - D(t + eps) ||_2 across all ten channels.
/// When `grads` is given, weight * dL/dparams is accumulated into it.
double time_smooth_loss(const Scene& scene, double t, SceneGradient* grads = nullptr, double weight = 1.0,
                        int threads = 0);

/// Mean over points i of sum_{j in N(i)} || D_mu(t)_i - D_mu(t)_j ||_2.
double knn_rigid_loss(const Scene& scene, double t, const KnnIndex& knn, SceneGradient* grads = nullptr,
                      double weight = 1.0, int threads = 0);

} // namespace splatflow
