// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Random scenes and cameras shared by the unit and acceptance tests.
//
#pragma once

#include <splatflow/types.hpp>

#include <cmath>
#include <random>

namespace splatflow::testing {

struct RandomSceneOptions {
    int points = 10;
    int poly_order = 3;
    int fourier_order = 4;
    int sh_degree = 3;
    int frame_count = 30;
    /// Scale of the random curve coefficients; 0 gives a static scene.
    double curve_scale = 0.05;
    double min_depth = 3.0;
    double max_depth = 6.0;
    double lateral = 1.0;
    double min_log_scale = std::log(0.05);
    double max_log_scale = std::log(0.3);
    double min_opacity = 0.05;
    double max_opacity = 0.95;
};

inline Quat random_unit_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Quat q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

/// Points in front of an identity camera looking down +z.
inline Scene random_scene(std::mt19937_64& rng, const RandomSceneOptions& o = {}) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };
    std::normal_distribution<double> n(0.0, 1.0);

    Scene scene;
    scene.poly_order = o.poly_order;
    scene.fourier_order = o.fourier_order;
    scene.sh_degree = o.sh_degree;
    scene.frame_count = o.frame_count;
    for (int i = 0; i < o.points; ++i) {
        DynamicGaussian p(o.poly_order, o.fourier_order, o.sh_degree);
        const double z = uni(o.min_depth, o.max_depth);
        p.mu0 = Vec3(uni(-o.lateral, o.lateral) * z / 4.0, uni(-o.lateral, o.lateral) * z / 4.0, z);
        // Deliberately unnormalized: the renderer normalizes internally.
        p.q0 = random_unit_quat(rng) * uni(0.7, 1.4);
        p.log_scale = Vec3(uni(o.min_log_scale, o.max_log_scale), uni(o.min_log_scale, o.max_log_scale),
                           uni(o.min_log_scale, o.max_log_scale));
        p.opacity_logit = logit(uni(o.min_opacity, o.max_opacity));
        for (std::size_t k = 0; k < p.sh_coeffs.size(); ++k) p.sh_coeffs[k] = (k < 3 ? 0.8 : 0.2) * n(rng);
        if (o.curve_scale > 0.0) {
            for (int c = 0; c < kCurveChannels; ++c) {
                for (double& v : p.curve(c).coeffs()) v = o.curve_scale * n(rng);
            }
            p.dilation_scale = uni(0.8, 1.2);
            p.dilation_base = uni(-0.1, 0.1);
        }
        scene.points.push_back(std::move(p));
    }
    return scene;
}

/// Pinhole camera at the origin looking down +z, with a small random pose jitter.
inline Camera random_camera(std::mt19937_64& rng, int width, int height, double jitter = 0.05) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = 1.1 * width * (1.0 + 0.1 * u(rng));
    cam.fy = 1.1 * height * (1.0 + 0.1 * u(rng));
    cam.cx = 0.5 * width + 0.5 * u(rng);
    cam.cy = 0.5 * height + 0.5 * u(rng);
    const Eigen::AngleAxisd r(jitter * u(rng), Vec3(u(rng), u(rng), 1.0).normalized());
    cam.world_to_cam.topLeftCorner<3, 3>() = r.toRotationMatrix();
    cam.world_to_cam.topRightCorner<3, 1>() = Vec3(jitter * u(rng), jitter * u(rng), jitter * u(rng));
    return cam;
}

inline Image random_image(std::mt19937_64& rng, int width, int height) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(width, height);
    for (double& v : img.data) v = u(rng);
    return img;
}

} // namespace splatflow::testing
