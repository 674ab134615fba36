// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/synthetic.hpp"

#include "splatflow/parallel.hpp"
#include "splatflow/rasterizer.hpp"
#include "splatflow/sh.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace splatflow {

namespace {

struct BlobMotion {
    Vec3 swing;
    Vec3 drift;
    double phase = 0.0;
};

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)).normalized();
}

// Motion parameters are a pure function of the options so that
// blob_offset() needs no extra state.
std::vector<BlobMotion> blob_motions(const SyntheticOptions& o) {
    std::mt19937_64 rng(o.seed * 7919 + 17);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    std::vector<BlobMotion> out(std::size_t(o.blobs));
    for (auto& m : out) {
        m.swing = random_unit(rng);
        m.drift = random_unit(rng);
        m.phase = u(rng);
    }
    return out;
}

} // namespace

Vec3 SyntheticDataset::blob_offset(int b, double t) const {
    const BlobMotion m = blob_motions(options)[std::size_t(b)];
    const double a = options.motion_amplitude;
    return a * (0.7 * m.swing * std::sin(2.0 * std::numbers::pi * t + m.phase) + 0.5 * m.drift * (2.0 * t - 1.0));
}

Scene SyntheticDataset::ground_truth_at(double t) const {
    Scene s = ground_truth;
    std::vector<Vec3> offsets;
    for (int b = 0; b < options.blobs; ++b) offsets.push_back(blob_offset(b, t));
    for (std::size_t i = 0; i < s.points.size(); ++i) s.points[i].mu0 += offsets[std::size_t(blob_of[i])];
    return s;
}

std::vector<Camera> ring_cameras(const SyntheticOptions& o, std::vector<bool>& is_holdout) {
    const int total = o.train_cameras + o.holdout_cameras;
    if (total <= 0) throw Error("synthetic scene needs at least one camera");
    is_holdout.assign(std::size_t(total), false);
    for (int j = 0; j < o.holdout_cameras; ++j) {
        is_holdout[std::size_t((j + 0.5) * total / o.holdout_cameras)] = true;
    }
    std::vector<Camera> cams;
    for (int k = 0; k < total; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / total;
        const Vec3 eye(o.ring_radius * std::cos(theta), -o.elevation * o.ring_radius, o.ring_radius * std::sin(theta));
        cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3(0, -1, 0), o.focal, o.width, o.height));
    }
    return cams;
}

SyntheticDataset make_synthetic_blobs(const SyntheticOptions& o) {
    if (o.frames < 1 || o.blobs < 1 || o.gaussians_per_blob < 1) throw Error("invalid synthetic scene options");
    SyntheticDataset ds;
    ds.options = o;
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    const Vec3 palette[3] = {Vec3(0.9, 0.15, 0.1), Vec3(0.1, 0.85, 0.2), Vec3(0.15, 0.25, 0.95)};
    Scene& gt = ds.ground_truth;
    gt.sh_degree = 0;
    gt.poly_order = 0;
    gt.fourier_order = 0;
    gt.frame_count = o.frames;
    for (int b = 0; b < o.blobs; ++b) {
        const double angle = 2.0 * std::numbers::pi * b / o.blobs;
        const Vec3 center(0.6 * std::cos(angle), 0.15 * u(rng), 0.6 * std::sin(angle));
        const Vec3 base = palette[b % 3];
        for (int k = 0; k < o.gaussians_per_blob; ++k) {
            DynamicGaussian p(0, 0, 0);
            p.mu0 = center + o.blob_radius * Vec3(n(rng), n(rng), n(rng));
            p.log_scale = Vec3::Constant(std::log(o.gaussian_scale)) + 0.2 * Vec3(u(rng), u(rng), u(rng));
            p.q0 = Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
            p.opacity_logit = logit(o.opacity);
            const Vec3 color = (base + 0.05 * Vec3(u(rng), u(rng), u(rng))).cwiseMax(0.0).cwiseMin(1.0);
            const Vec3 dc = rgb_to_sh_dc(color);
            p.sh_coeffs = {dc[0], dc[1], dc[2]};
            gt.points.push_back(std::move(p));
            ds.blob_of.push_back(b);
        }
    }

    std::vector<bool> is_holdout;
    const auto cams = ring_cameras(o, is_holdout);
    struct Job {
        std::size_t cam;
        double t;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < cams.size(); ++c) {
        for (int f = 0; f < o.frames; ++f) jobs.push_back({c, o.frames == 1 ? 0.0 : double(f) / (o.frames - 1)});
    }
    std::vector<Frame> frames(jobs.size());
    RenderSettings settings;
    settings.threads = 1;
    parallel_for(jobs.size(), 0, [&](std::size_t j) {
        const Scene at = ds.ground_truth_at(jobs[j].t);
        frames[j].camera = cams[jobs[j].cam];
        frames[j].t = jobs[j].t;
        frames[j].image = render_reference(at, 0.0, cams[jobs[j].cam], Vec3::Zero(), settings);
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        (is_holdout[jobs[j].cam] ? ds.holdout : ds.train).push_back(std::move(frames[j]));
    }

    const Scene start = ds.ground_truth_at(0.0);
    for (const auto& p : start.points) {
        SeedPoint s;
        s.position = p.mu0 + o.seed_noise * Vec3(n(rng), n(rng), n(rng));
        s.color = Vec3::Constant(0.5) + kShC0 * Vec3(p.sh_coeffs[0], p.sh_coeffs[1], p.sh_coeffs[2]);
        ds.seeds.push_back(s);
    }
    for (int k = 0; k < o.random_seeds; ++k) {
        SeedPoint s;
        s.position = 1.5 * Vec3(u(rng), u(rng), u(rng));
        ds.seeds.push_back(s);
    }
    return ds;
}

} // namespace splatflow
