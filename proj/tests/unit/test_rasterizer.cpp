// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include <splatflow/dddm.hpp>
#include <splatflow/rasterizer.hpp>

#include "fixtures.hpp"
#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace splatflow;
using namespace splatflow::testing;

namespace {

/// Wide support makes the truncation boundary numerically invisible to
/// finite differences (exp(-500) is far below double resolution of the image).
RenderSettings smooth_settings() {
    RenderSettings s;
    s.transmittance_threshold = 0.0;
    s.support_chi2 = 1000.0;
    s.threads = 2;
    return s;
}

double weighted_sum(const Image& img, const Image& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) acc += img.data[i] * w.data[i];
    return acc;
}

Image random_weights(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Image img(w, h);
    for (double& v : img.data) v = u(rng);
    return img;
}

Mat3 random_covariance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(std::log(0.05), std::log(0.4));
    return build_covariance(Vec3(u(rng), u(rng), u(rng)), random_unit_quat(rng));
}

} // namespace

TEST(Rasterizer, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2; ++trial) {
        RandomSceneOptions o;
        o.points = 6;
        o.fourier_order = 2;
        o.sh_degree = trial == 0 ? 3 : 1;
        const Scene scene = random_scene(rng, o);
        const Camera cam = random_camera(rng, 16, 16);
        const double t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const Vec3 bg(0.2, 0.3, 0.4);
        const Image weights = random_weights(rng, 16, 16);
        const auto settings = smooth_settings();

        const auto fwd = rasterize_forward(scene, t, cam, bg, settings);
        SceneGradient grads = zeros_like(scene);
        rasterize_backward(scene, t, cam, bg, fwd.aux, weights, grads, settings);

        const auto result = check_scene_gradients(scene, grads, [&](const Scene& s) {
            return weighted_sum(rasterize_forward(s, t, cam, bg, settings).image, weights);
        });
        EXPECT_LT(result.overall, 1e-4) << result.worst_where;
        EXPECT_GT(result.checked, 600u);
    }
}

TEST(Rasterizer, BackwardHandlesAlphaClamp) {
    std::mt19937_64 rng(5);
    RandomSceneOptions o;
    o.points = 4;
    o.min_opacity = 0.995;
    o.max_opacity = 0.999;
    o.fourier_order = 1;
    Scene scene = random_scene(rng, o);
    const Camera cam = random_camera(rng, 16, 16);
    const auto settings = smooth_settings();
    const Image weights = random_weights(rng, 16, 16);
    const auto fwd = rasterize_forward(scene, 0.3, cam, Vec3::Zero(), settings);
    SceneGradient grads = zeros_like(scene);
    rasterize_backward(scene, 0.3, cam, Vec3::Zero(), fwd.aux, weights, grads, settings);
    for (const auto& g : grads) {
        EXPECT_TRUE(g.mu0.allFinite());
        EXPECT_TRUE(std::isfinite(g.opacity_logit));
    }
}

TEST(Rasterizer, TiledMatchesReference) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        RandomSceneOptions o;
        o.points = 150;
        o.fourier_order = 3;
        o.lateral = 1.6;
        const Scene scene = random_scene(rng, o);
        const Camera cam = random_camera(rng, 40, 56);
        RenderSettings s;
        s.transmittance_threshold = 0.0;
        s.threads = 3;
        const double t = 0.25 * trial;
        const Image tiled = rasterize_forward(scene, t, cam, Vec3(0.1, 0.5, 0.9), s).image;
        const Image ref = render_reference(scene, t, cam, Vec3(0.1, 0.5, 0.9), s);
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.data.size(); ++i) worst = std::max(worst, std::abs(tiled.data[i] - ref.data[i]));
        EXPECT_LE(worst, 1e-12);
    }
}

TEST(Rasterizer, TileRectCoversSupport) {
    std::mt19937_64 rng(17);
    RandomSceneOptions o;
    o.points = 60;
    o.lateral = 2.0;
    const Scene scene = random_scene(rng, o);
    const Camera cam = random_camera(rng, 50, 37);
    const auto splats = project_scene(scene, 0.5, cam, RenderSettings{});
    ASSERT_FALSE(splats.empty());
    const int tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    const int tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    for (const auto& s : splats) {
        const auto rect = splat_tile_rect(s, tiles_x, tiles_y);
        for (int py = 0; py < cam.height; ++py) {
            for (int px = 0; px < cam.width; ++px) {
                const double dx = px + 0.5 - s.mean2d.x(), dy = py + 0.5 - s.mean2d.y();
                const double maha = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
                if (maha > kConfidenceChi2) continue;
                const int tx = px / kTileSize, ty = py / kTileSize;
                EXPECT_TRUE(tx >= rect[0] && tx <= rect[2] && ty >= rect[1] && ty <= rect[3]);
            }
        }
    }
}

TEST(Rasterizer, EmptySceneRendersBackground) {
    Scene scene;
    scene.fourier_order = 2;
    Camera cam;
    cam.width = 20;
    cam.height = 10;
    cam.fx = cam.fy = 20.0;
    const auto r = rasterize_forward(scene, 0.0, cam, Vec3(0.25, 0.5, 0.75));
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 20; ++x) {
            EXPECT_EQ(r.image.at(x, y, 0), 0.25);
            EXPECT_EQ(r.image.at(x, y, 2), 0.75);
        }
    }
}

TEST(Rasterizer, AlphaIsClamped) {
    Scene scene;
    scene.sh_degree = 0;
    scene.fourier_order = 0;
    DynamicGaussian p(3, 0, 0);
    p.mu0 = Vec3(0.0, 0.0, 5.0);
    p.log_scale = Vec3::Constant(std::log(1.0));
    p.opacity_logit = 40.0;
    p.sh_coeffs = {0.5 / 0.28209479177387814, 0.5 / 0.28209479177387814, 0.5 / 0.28209479177387814};
    scene.points.push_back(p);
    Camera cam = Camera::look_at(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), 16.0, 16, 16);
    // Put the splat center exactly on pixel (7, 7): unclamped alpha would be 1.
    cam.cx = cam.cy = 7.5;
    const auto r = rasterize_forward(scene, 0.0, cam, Vec3::Zero());
    EXPECT_NEAR(r.image.at(7, 7, 0), 0.99, 1e-12);
    // One pixel off center: alpha = exp(-1/2 / (cov + dilation)) stays below the clamp.
    const double var = (16.0 / 5.0) * (16.0 / 5.0) + 0.3;
    EXPECT_NEAR(r.image.at(8, 7, 0), std::exp(-0.5 / var), 1e-12);
}

TEST(Rasterizer, CullingStatuses) {
    std::mt19937_64 rng(2);
    const Camera cam = Camera::look_at(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), 20.0, 32, 32);
    const Mat3 sigma = Mat3::Identity() * 0.01;
    EXPECT_EQ(project_point(Vec3(0, 0, -2), sigma, cam).status, ProjectionStatus::CulledDepth);
    EXPECT_EQ(project_point(Vec3(0, 0, 1000), sigma, cam).status, ProjectionStatus::CulledDepth);
    EXPECT_EQ(project_point(Vec3(50, 0, 2), sigma, cam).status, ProjectionStatus::CulledFrustum);
    EXPECT_EQ(project_point(Vec3(0, 0, 2), sigma, cam).status, ProjectionStatus::Visible);
    RenderSettings no_dilation;
    no_dilation.cov_dilation = 0.0;
    EXPECT_EQ(project_point(Vec3(0, 0, 2), Mat3::Zero(), cam, no_dilation).status, ProjectionStatus::CulledSingular);
}

TEST(Rasterizer, ProjectionMatchesPinholeAndSampleCovariance) {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const Camera cam = random_camera(rng, 64, 48, 0.2);
        const Vec3 mu(0.3 * n(rng), 0.3 * n(rng), 4.0 + n(rng) * 0.2);
        const Mat3 sigma = random_covariance(rng) * 0.3;
        const auto g = project_point(mu, sigma, cam);
        ASSERT_TRUE(g.visible());
        const Vec3 pc = cam.rotation() * mu + cam.translation();
        EXPECT_NEAR(g.mean2d.x(), cam.fx * pc.x() / pc.z() + cam.cx, 1e-12);
        EXPECT_NEAR(g.mean2d.y(), cam.fy * pc.y() / pc.z() + cam.cy, 1e-12);

        const Eigen::LLT<Mat3> llt(sigma);
        const Mat3 l = llt.matrixL();
        const int samples = 200000;
        Vec2 mean = Vec2::Zero();
        Mat2 second = Mat2::Zero();
        std::vector<Vec2> proj(samples);
        for (int s = 0; s < samples; ++s) {
            const Vec3 x = mu + l * Vec3(n(rng), n(rng), n(rng));
            const Vec3 c = cam.rotation() * x + cam.translation();
            proj[s] = Vec2(cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy);
            mean += proj[s];
        }
        mean /= samples;
        for (const auto& p : proj) second += (p - mean) * (p - mean).transpose();
        second /= samples - 1;
        EXPECT_LT((second - g.cov2d).norm() / g.cov2d.norm(), 0.03);
    }
}

TEST(Rasterizer, BackwardIsDeterministicForFixedThreads) {
    std::mt19937_64 rng(8);
    RandomSceneOptions o;
    o.points = 80;
    o.lateral = 1.5;
    const Scene scene = random_scene(rng, o);
    const Camera cam = random_camera(rng, 48, 48);
    const Image weights = random_weights(rng, 48, 48);
    RenderSettings s;
    s.threads = 3;
    auto run = [&] {
        const auto fwd = rasterize_forward(scene, 0.6, cam, Vec3::Zero(), s);
        SceneGradient g = zeros_like(scene);
        rasterize_backward(scene, 0.6, cam, Vec3::Zero(), fwd.aux, weights, g, s);
        return g;
    };
    EXPECT_TRUE(run() == run());
}

TEST(Rasterizer, BackwardRejectsStaleAux) {
    std::mt19937_64 rng(4);
    Scene scene = random_scene(rng);
    const Camera cam = random_camera(rng, 16, 16);
    const auto fwd = rasterize_forward(scene, 0.0, cam, Vec3::Zero());
    scene.points.pop_back();
    SceneGradient g = zeros_like(scene);
    EXPECT_THROW(rasterize_backward(scene, 0.0, cam, Vec3::Zero(), fwd.aux, Image(16, 16), g), Error);
}

TEST(Rasterizer, RejectsUnnormalizedTime) {
    std::mt19937_64 rng(4);
    const Scene scene = random_scene(rng);
    const Camera cam = random_camera(rng, 16, 16);
    EXPECT_THROW(rasterize_forward(scene, 1.5, cam, Vec3::Zero()), Error);
    EXPECT_THROW(rasterize_forward(scene, -0.1, cam, Vec3::Zero()), Error);
}
