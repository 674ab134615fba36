// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include <splatflow/curve_fit.hpp>
#include <splatflow/dddm.hpp>
#include <splatflow/rasterizer.hpp>
#include <splatflow/regularize.hpp>

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace splatflow;

namespace {

Scene random_scene(int points, int fourier_order, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    Scene scene;
    scene.poly_order = 3;
    scene.fourier_order = fourier_order;
    scene.sh_degree = 3;
    scene.frame_count = 60;
    for (int i = 0; i < points; ++i) {
        DynamicGaussian p(3, fourier_order, 3);
        p.mu0 = Vec3(u(rng), u(rng), 4.0 + u(rng));
        p.q0 = Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
        p.log_scale = Vec3::Constant(std::log(0.03)) + 0.3 * Vec3(u(rng), u(rng), u(rng));
        p.opacity_logit = 2.0 * u(rng);
        for (double& c : p.sh_coeffs) c = 0.3 * n(rng);
        for (int c = 0; c < kCurveChannels; ++c) {
            for (double& v : p.curve(c).coeffs()) v = 0.02 * n(rng);
        }
        scene.points.push_back(std::move(p));
    }
    return scene;
}

Camera camera(int size) {
    return Camera::look_at(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), 1.1 * size, size, size);
}

RenderSettings single_thread() {
    RenderSettings s;
    s.threads = 1;
    return s;
}

void BM_Forward(benchmark::State& state) {
    const Scene scene = random_scene(int(state.range(0)), 16);
    const Camera cam = camera(int(state.range(1)));
    const auto settings = single_thread();
    for (auto _ : state) {
        benchmark::DoNotOptimize(rasterize_forward(scene, 0.4, cam, Vec3::Zero(), settings));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Args({1000, 64})->Args({10000, 128})->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
    const Scene scene = random_scene(int(state.range(0)), 16);
    const Camera cam = camera(int(state.range(1)));
    const auto settings = single_thread();
    const auto fwd = rasterize_forward(scene, 0.4, cam, Vec3::Zero(), settings);
    Image d_image(cam.width, cam.height);
    for (double& v : d_image.data) v = 1e-3;
    for (auto _ : state) {
        SceneGradient grads = zeros_like(scene);
        rasterize_backward(scene, 0.4, cam, Vec3::Zero(), fwd.aux, d_image, grads, settings);
        benchmark::DoNotOptimize(grads.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Args({1000, 64})->Args({10000, 128})->Unit(benchmark::kMillisecond);

void BM_ReferenceRender(benchmark::State& state) {
    const Scene scene = random_scene(int(state.range(0)), 16);
    const Camera cam = camera(64);
    const auto settings = single_thread();
    for (auto _ : state) benchmark::DoNotOptimize(render_reference(scene, 0.4, cam, Vec3::Zero(), settings));
}
BENCHMARK(BM_ReferenceRender)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_DeformPoint(benchmark::State& state) {
    const Scene scene = random_scene(1, int(state.range(0)));
    TimeBasis basis(3, int(state.range(0)));
    double t = 0.0;
    for (auto _ : state) {
        t = t < 0.99 ? t + 0.01 : 0.0;
        basis.update(1.0, 0.0, t);
        benchmark::DoNotOptimize(deform_point(scene.points[0], basis));
    }
}
BENCHMARK(BM_DeformPoint)->Arg(2)->Arg(16)->Arg(48);

void BM_KnnBuild(benchmark::State& state) {
    const Scene scene = random_scene(int(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(build_knn(scene, 8));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KnnBuild)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_RegularizerLosses(benchmark::State& state) {
    const Scene scene = random_scene(int(state.range(0)), 16);
    const KnnIndex knn = build_knn(scene, 8);
    SceneGradient grads = zeros_like(scene);
    for (auto _ : state) {
        benchmark::DoNotOptimize(time_smooth_loss(scene, 0.3, &grads, 0.05, 1));
        benchmark::DoNotOptimize(knn_rigid_loss(scene, 0.3, knn, &grads, 0.05, 1));
    }
}
BENCHMARK(BM_RegularizerLosses)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_FitCurve(benchmark::State& state) {
    std::vector<double> t, y;
    for (int i = 0; i < 120; ++i) {
        t.push_back(i / 119.0);
        y.push_back(t.back() * t.back() + 0.3 * std::sin(2.0 * std::numbers::pi * 3.0 * t.back()));
    }
    const auto options = matched_budget(CurveModel(state.range(0)), 3, 8, 2.0 * std::numbers::pi);
    for (auto _ : state) benchmark::DoNotOptimize(fit_curve(t, y, options));
}
BENCHMARK(BM_FitCurve)->DenseRange(0, 2);

} // namespace

BENCHMARK_MAIN();
