// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/regularize.hpp"

#include "splatflow/dddm.hpp"
#include "splatflow/parallel.hpp"

#include <cmath>
#include <numeric>

namespace splatflow {

double time_smooth_epsilon(const Scene& scene) {
    if (scene.frame_count < 1) throw Error("time smoothness needs frame_count >= 1");
    return 0.1 / double(scene.frame_count);
}

double time_smooth_loss(const Scene& scene, double t, SceneGradient* grads, double weight, int threads) {
    const double eps = time_smooth_epsilon(scene);
    if (!(t >= 0.0 && t <= 1.0)) throw Error("unnormalized timestamp");
    const std::size_t n = scene.points.size();
    if (n == 0) return 0.0;
    if (grads && grads->size() != n) throw Error("gradient buffer does not match scene point count");

    std::vector<double> per_point(n, 0.0);
    const double scale = weight / double(n);
    parallel_chunks(n, resolve_threads(threads), [&](std::size_t begin, std::size_t end, int) {
        TimeBasis now(scene.poly_order, scene.fourier_order);
        TimeBasis later(scene.poly_order, scene.fourier_order);
        std::array<double, kCurveChannels> diff{};
        for (std::size_t i = begin; i < end; ++i) {
            const auto& p = scene.points[i];
            now.update(p.dilation_scale, p.dilation_base, t);
            later.update(p.dilation_scale, p.dilation_base, t + eps);
            double sq = 0.0;
            for (int c = 0; c < kCurveChannels; ++c) {
                diff[c] = now.evaluate(p.curve(c)) - later.evaluate(p.curve(c));
                sq += diff[c] * diff[c];
            }
            const double norm = std::sqrt(sq);
            per_point[i] = norm;
            if (!grads || norm == 0.0) continue;
            auto& g = (*grads)[i];
            for (int c = 0; c < kCurveChannels; ++c) {
                const double up = scale * diff[c] / norm;
                now.accumulate(p.curve(c), up, g.curve(c), g.dilation_scale, g.dilation_base);
                later.accumulate(p.curve(c), -up, g.curve(c), g.dilation_scale, g.dilation_base);
            }
        }
    });
    return std::accumulate(per_point.begin(), per_point.end(), 0.0) / double(n);
}

double knn_rigid_loss(const Scene& scene, double t, const KnnIndex& knn, SceneGradient* grads, double weight,
                      int threads) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error("unnormalized timestamp");
    const std::size_t n = scene.points.size();
    if (knn.point_count() != n || knn.k < 1) throw Error("knn index stale");
    if (grads && grads->size() != n) throw Error("gradient buffer does not match scene point count");
    if (n == 0) return 0.0;

    std::vector<Vec3> residual(n);
    parallel_chunks(n, resolve_threads(threads), [&](std::size_t begin, std::size_t end, int) {
        TimeBasis basis(scene.poly_order, scene.fourier_order);
        for (std::size_t i = begin; i < end; ++i) {
            const auto& p = scene.points[i];
            basis.update(p.dilation_scale, p.dilation_base, t);
            for (int c = 0; c < kPositionChannels; ++c) residual[i][c] = basis.evaluate(p.curves_mu[c]);
        }
    });

    const double scale = weight / double(n);
    double total = 0.0;
    std::vector<Vec3> d_residual(grads ? n : 0, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
        for (const std::uint32_t j : knn.of(i)) {
            if (j >= n) throw Error("knn index stale");
            const Vec3 d = residual[i] - residual[j];
            const double norm = d.norm();
            total += norm;
            if (!grads || norm == 0.0) continue;
            const Vec3 up = scale * d / norm;
            d_residual[i] += up;
            d_residual[j] -= up;
        }
    }

    if (grads) {
        parallel_chunks(n, resolve_threads(threads), [&](std::size_t begin, std::size_t end, int) {
            TimeBasis basis(scene.poly_order, scene.fourier_order);
            for (std::size_t i = begin; i < end; ++i) {
                const auto& p = scene.points[i];
                auto& g = (*grads)[i];
                basis.update(p.dilation_scale, p.dilation_base, t);
                for (int c = 0; c < kPositionChannels; ++c) {
                    basis.accumulate(p.curves_mu[c], d_residual[i][c], g.curves_mu[c], g.dilation_scale,
                                     g.dilation_base);
                }
            }
        });
    }
    return total / double(n);
}

} // namespace splatflow
