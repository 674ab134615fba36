// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/optimize.hpp"

#include "splatflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

namespace splatflow {

namespace {

std::size_t group_index(ParamGroup g) { return static_cast<std::size_t>(g); }

bool is_dynamic(ParamGroup g) { return g == ParamGroup::Dddm || g == ParamGroup::Dilation; }

void check_shapes(const Scene& scene, const SceneGradient& grads, const AdamState& state) {
    if (grads.size() != scene.points.size()) throw Error("gradient buffer does not match scene point count");
    if (state.m.size() != scene.points.size() || state.v.size() != scene.points.size()) {
        throw Error("optimizer state does not match scene point count");
    }
}

void check_finite(const SceneGradient& grads) {
    for (const auto& g : grads) {
        for (const auto& block : param_blocks(const_cast<GaussianGrad&>(g))) {
            for (double v : block.values) {
                if (!std::isfinite(v)) throw Error(std::string("non-finite gradient in group ") + to_string(block.group));
            }
        }
    }
}

std::vector<std::size_t> holdout_subset(std::size_t n, std::size_t max_frames) {
    std::vector<std::size_t> idx;
    const std::size_t m = std::min(n, max_frames);
    for (std::size_t k = 0; k < m; ++k) idx.push_back(k * n / m);
    return idx;
}

} // namespace

PhotometricLoss photometric_loss(const Image& rendered, const Image& target, double w_ssim) {
    if (rendered.width != target.width || rendered.height != target.height ||
        rendered.data.size() != target.data.size()) {
        throw Error("photometric loss inputs have different dimensions");
    }
    PhotometricLoss out;
    out.d_image = Image(rendered.width, rendered.height);
    const std::size_t n = rendered.data.size();
    if (n == 0) throw Error("photometric loss inputs are empty");

    const double l1_scale = (1.0 - w_ssim) / double(n);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rendered.data[i] - target.data[i];
        l1 += std::abs(d);
        out.d_image.data[i] = d > 0.0 ? l1_scale : (d < 0.0 ? -l1_scale : 0.0);
    }
    out.l1 = l1 / double(n);

    out.ssim = 0.0;
    if (w_ssim > 0.0) {
        const std::size_t pixels = rendered.pixel_count();
        std::vector<double> a(pixels), b(pixels), grad(pixels);
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < pixels; ++i) {
                a[i] = rendered.data[3 * i + c];
                b[i] = target.data[3 * i + c];
            }
            out.ssim += ssim_plane(a, b, rendered.width, rendered.height, SsimRegion::Same, grad) / 3.0;
            for (std::size_t i = 0; i < pixels; ++i) out.d_image.data[3 * i + c] -= w_ssim * grad[i] / 3.0;
        }
    } else {
        out.ssim = 1.0;
    }
    out.value = (1.0 - w_ssim) * out.l1 + w_ssim * (1.0 - out.ssim);
    return out;
}

AdamState AdamState::for_scene(const Scene& scene) {
    AdamState s;
    s.m = zeros_like(scene);
    s.v = zeros_like(scene);
    return s;
}

double position_lr(const TrainConfig& config, int iter) {
    if (config.total_steps <= 0) return config.lr_position;
    const double f = std::clamp(double(iter) / double(config.total_steps), 0.0, 1.0);
    return std::exp((1.0 - f) * std::log(config.lr_position) + f * std::log(config.lr_position_final));
}

double group_lr(const TrainConfig& config, ParamGroup group, int iter, double position_scale) {
    switch (group) {
    case ParamGroup::Position: return position_lr(config, iter) * position_scale;
    case ParamGroup::Rotation: return config.lr_rotation;
    case ParamGroup::Scaling: return config.lr_scaling;
    case ParamGroup::Opacity: return config.lr_opacity;
    case ParamGroup::ShDc: return config.lr_sh_dc;
    case ParamGroup::ShRest: return config.lr_sh_rest;
    case ParamGroup::Dddm:
    case ParamGroup::Dilation: return config.lr_dddm;
    }
    return 0.0;
}

void adam_step(Scene& scene, const SceneGradient& grads, AdamState& state, const TrainConfig& config, int iter,
               const AdamOptions& options) {
    check_shapes(scene, grads, state);
    check_finite(grads);

    struct GroupCoeffs {
        bool active = false;
        double lr = 0.0;
        double bc1 = 1.0;
        double bc2 = 1.0;
    };
    std::array<GroupCoeffs, kParamGroupCount> coeffs;
    for (std::size_t gi = 0; gi < kParamGroupCount; ++gi) {
        const auto g = static_cast<ParamGroup>(gi);
        if (options.freeze_dynamics && is_dynamic(g)) continue;
        const std::int64_t step = ++state.steps[gi];
        coeffs[gi] = {true, group_lr(config, g, iter, options.position_scale),
                      1.0 - std::pow(config.adam_beta1, double(step)), 1.0 - std::pow(config.adam_beta2, double(step))};
    }

    const double b1 = config.adam_beta1, b2 = config.adam_beta2, eps = config.adam_eps, wd = config.weight_decay;
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
        auto params = param_blocks(scene.points[i]);
        const auto g = param_blocks(const_cast<GaussianGrad&>(grads[i]));
        auto m = param_blocks(state.m[i]);
        auto v = param_blocks(state.v[i]);
        for (std::size_t b = 0; b < params.size(); ++b) {
            const GroupCoeffs& c = coeffs[group_index(params[b].group)];
            if (!c.active) continue;
            const double decay = 1.0 - c.lr * wd;
            for (std::size_t k = 0; k < params[b].values.size(); ++k) {
                const double grad = g[b].values[k];
                double& mk = m[b].values[k];
                double& vk = v[b].values[k];
                mk = b1 * mk + (1.0 - b1) * grad;
                vk = b2 * vk + (1.0 - b2) * grad * grad;
                double& p = params[b].values[k];
                p *= decay;
                p -= c.lr * (mk / c.bc1) / (std::sqrt(vk / c.bc2) + eps);
            }
        }
        auto& q = scene.points[i].q0;
        const double norm = q.norm();
        if (norm > 0.0) q /= norm;
    }
}

void DensifyStats::reset(std::size_t points) {
    grad_sum.assign(points, 0.0);
    count.assign(points, 0);
}

void DensifyStats::add(const BackwardStats& stats) {
    if (stats.visible.size() != grad_sum.size()) throw Error("densify statistics do not match scene point count");
    for (std::size_t i = 0; i < grad_sum.size(); ++i) {
        if (!stats.visible[i]) continue;
        grad_sum[i] += stats.mean2d_grad_norm[i];
        ++count[i];
    }
}

DensifyReport density_control(Scene& scene, DensifyStats& stats, AdamState& state, const TrainConfig& config,
                              double scene_extent, std::mt19937_64& rng) {
    const std::size_t n = scene.points.size();
    if (stats.grad_sum.size() != n || stats.count.size() != n) {
        throw Error("densify statistics do not match scene point count");
    }
    if (state.m.size() != n || state.v.size() != n) throw Error("optimizer state does not match scene point count");

    DensifyReport report;
    const double size_threshold = config.percent_dense * scene_extent;
    const double log_divisor = std::log(config.split_scale_divisor);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<std::uint8_t> remove(n, 0);
    std::vector<DynamicGaussian> clones, children;
    for (std::size_t i = 0; i < n; ++i) {
        if (stats.count[i] == 0) continue;
        const double avg = stats.grad_sum[i] / double(stats.count[i]);
        if (!(avg >= config.densify_grad_threshold)) continue;
        const DynamicGaussian& p = scene.points[i];
        const Vec3 scale = p.log_scale.array().exp();
        if (scale.maxCoeff() <= size_threshold) {
            clones.push_back(p);
            ++report.cloned;
            continue;
        }
        const Mat3 rot = quat_to_rotation(p.q0);
        for (int c = 0; c < config.split_children; ++c) {
            DynamicGaussian child = p;
            const Vec3 z(normal(rng), normal(rng), normal(rng));
            child.mu0 = p.mu0 + rot * scale.cwiseProduct(z);
            child.log_scale = p.log_scale - Vec3::Constant(log_divisor);
            children.push_back(std::move(child));
        }
        remove[i] = 1;
        ++report.split;
    }

    std::vector<DynamicGaussian> points;
    std::vector<GaussianGrad> m, v;
    points.reserve(n + clones.size() + children.size());
    auto push = [&](DynamicGaussian&& p, GaussianGrad* mp, GaussianGrad* vp) {
        if (sigmoid(p.opacity_logit) < config.prune_opacity) {
            ++report.pruned;
            return;
        }
        m.push_back(mp ? std::move(*mp) : zeros_like(p));
        v.push_back(vp ? std::move(*vp) : zeros_like(p));
        points.push_back(std::move(p));
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (!remove[i]) push(std::move(scene.points[i]), &state.m[i], &state.v[i]);
    }
    for (auto& p : clones) push(std::move(p), nullptr, nullptr);
    for (auto& p : children) push(std::move(p), nullptr, nullptr);

    scene.points = std::move(points);
    state.m = std::move(m);
    state.v = std::move(v);
    stats.reset(scene.points.size());
    return report;
}

double camera_extent(std::span<const Frame> frames) {
    if (frames.empty()) return 1.0;
    Vec3 mean = Vec3::Zero();
    for (const auto& f : frames) mean += f.camera.center();
    mean /= double(frames.size());
    double radius = 0.0;
    for (const auto& f : frames) radius = std::max(radius, (f.camera.center() - mean).norm());
    return radius > 1e-9 ? 1.1 * radius : 1.0;
}

int count_distinct_times(std::span<const Frame> frames) {
    std::set<double> times;
    for (const auto& f : frames) times.insert(f.t);
    return std::max<int>(1, int(times.size()));
}

TrainResult train(std::span<const Frame> frames, std::span<const Frame> holdout, std::span<const SeedPoint> seeds,
                  const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    if (frames.empty()) throw Error("training dataset is empty");
    std::vector<Frame> all(frames.begin(), frames.end());
    all.insert(all.end(), holdout.begin(), holdout.end());
    Scene scene = new_scene_from_points(seeds, config, count_distinct_times(all));
    return train_scene(std::move(scene), frames, holdout, config, hooks);
}

TrainResult train_scene(Scene scene, std::span<const Frame> frames, std::span<const Frame> holdout,
                        const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    scene.validate();
    if (frames.empty()) throw Error("training dataset is empty");
    for (const auto& f : frames) {
        if (f.image.width != f.camera.width || f.image.height != f.camera.height) {
            throw Error("frame image does not match its camera dimensions");
        }
        if (!(f.t >= 0.0 && f.t <= 1.0)) throw Error("unnormalized timestamp");
    }
    auto warn = [&](const std::string& msg) {
        if (hooks.on_warning) {
            hooks.on_warning(msg);
        } else {
            std::cerr << "warning: " << msg << '\n';
        }
    };
    if (count_distinct_times(frames) == 1) warn("all training frames share one timestamp; dynamics are degenerate");

    TrainResult result;
    const RenderSettings settings = config.render_settings();
    const Vec3 background(config.background[0], config.background[1], config.background[2]);
    const double extent = camera_extent(frames);
    const double position_scale = config.scale_position_lr_by_extent ? extent : 1.0;
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
    const auto eval_frames = holdout_subset(holdout.size(), 8);

    AdamState state = AdamState::for_scene(scene);
    DensifyStats densify;
    densify.reset(scene.points.size());
    SceneGradient grads = zeros_like(scene);
    KnnIndex knn;
    bool have_knn = false;

    for (int iter = 0; iter < config.total_steps; ++iter) {
        const int completed = iter + 1;
        const bool dynamic = iter >= config.warmup_static_steps;
        bool rigid_phase = false;
        bool densify_phase = iter < config.densify_end;
        if (config.alt_cadence > 0 && dynamic && iter < config.densify_end) {
            const int phase = (iter - config.warmup_static_steps) / config.alt_cadence;
            if (phase % 2 == 1) {
                densify_phase = false;
                rigid_phase = true;
                if ((iter - config.warmup_static_steps) % config.alt_cadence == 0 && scene.points.size() > std::size_t(config.knn_k)) {
                    knn = build_knn(scene, config.knn_k, iter);
                    have_knn = true;
                    ++result.knn_builds;
                    result.knn_built_at = iter;
                }
            }
        }
        if (iter >= config.densify_end + config.knn_offset) rigid_phase = true;

        const Frame& frame = frames[pick(rng)];
        if (grads.size() != scene.points.size()) {
            grads = zeros_like(scene);
        } else {
            set_zero(grads);
        }
        const RenderResult render = rasterize_forward(scene, frame.t, frame.camera, background, settings);
        const PhotometricLoss photo = photometric_loss(render.image, frame.image, config.w_ssim);
        BackwardStats bstats;
        rasterize_backward(scene, frame.t, frame.camera, background, render.aux, photo.d_image, grads, settings,
                           &bstats);

        TrainLogRow row;
        row.iter = iter;
        row.l1 = photo.l1;
        row.ssim = photo.ssim;
        row.loss = photo.value;
        row.holdout_psnr = std::numeric_limits<double>::quiet_NaN();
        if (dynamic && config.w_tsmooth > 0.0 && !scene.points.empty()) {
            row.tsmooth = time_smooth_loss(scene, frame.t, &grads, config.w_tsmooth, config.threads);
            row.loss += config.w_tsmooth * row.tsmooth;
        }
        if (dynamic && rigid_phase && have_knn && config.w_rigid > 0.0 && knn.point_count() == scene.points.size()) {
            row.rigid = knn_rigid_loss(scene, frame.t, knn, &grads, config.w_rigid, config.threads);
            row.loss += config.w_rigid * row.rigid;
        }

        if (densify_phase) densify.add(bstats);
        AdamOptions opts;
        opts.position_scale = position_scale;
        opts.freeze_dynamics = !dynamic;
        adam_step(scene, grads, state, config, iter, opts);

        if (densify_phase && completed > config.densify_start && completed % config.densify_interval == 0 &&
            completed < config.densify_end) {
            density_control(scene, densify, state, config, extent, rng);
        }
        if (completed == config.densify_end) {
            if (scene.points.size() > std::size_t(config.knn_k)) {
                knn = build_knn(scene, config.knn_k, iter);
                have_knn = true;
                ++result.knn_builds;
                result.knn_built_at = iter;
            } else {
                warn("too few points for the rigid neighbour index; rigid loss disabled");
            }
        }
        if (densify.grad_sum.size() != scene.points.size()) densify.reset(scene.points.size());

        row.points = scene.points.size();
        if (!eval_frames.empty() && config.eval_interval > 0 && completed % config.eval_interval == 0) {
            double sum = 0.0;
            for (const std::size_t k : eval_frames) {
                const Frame& h = holdout[k];
                const Image img = rasterize_forward(scene, h.t, h.camera, background, settings).image;
                sum += psnr(clamped(img), h.image);
            }
            row.holdout_psnr = sum / double(eval_frames.size());
        }
        if (hooks.on_log) hooks.on_log(row);
        result.log.push_back(row);
        if (hooks.on_iteration) hooks.on_iteration(completed, scene);
        if (hooks.on_checkpoint && config.checkpoint_interval > 0 && completed % config.checkpoint_interval == 0) {
            hooks.on_checkpoint(completed, scene);
        }
    }
    result.scene = std::move(scene);
    return result;
}

std::string format_log_csv(std::span<const TrainLogRow> rows) {
    std::ostringstream out;
    out.precision(9);
    out << "iter,loss,l1,ssim,tsmooth,rigid,points,holdout_psnr\n";
    for (const auto& r : rows) {
        out << r.iter << ',' << r.loss << ',' << r.l1 << ',' << r.ssim << ',' << r.tsmooth << ',' << r.rigid << ','
            << r.points << ',';
        if (!std::isnan(r.holdout_psnr)) out << r.holdout_psnr;
        out << '\n';
    }
    return out.str();
}

} // namespace splatflow
