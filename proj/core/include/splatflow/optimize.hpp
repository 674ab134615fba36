// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Losses, Adam, adaptive density control and the training loop.
//
#pragma once

#include "splatflow/config.hpp"
#include "splatflow/rasterizer.hpp"
#include "splatflow/regularize.hpp"
#include "splatflow/scene.hpp"
#include "splatflow/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace splatflow {

struct PhotometricLoss {
    double value = 0.0;
    double l1 = 0.0;
    /// Mean per-channel SSIM with zero padding at the borders.
    double ssim = 1.0;
    Image d_image;
};

/// (1 - w_ssim) L1 + w_ssim (1 - SSIM) and its gradient with respect to `rendered`.
PhotometricLoss photometric_loss(const Image& rendered, const Image& target, double w_ssim);

inline constexpr std::size_t kParamGroupCount = 8;

struct AdamState {
    /// First and second moments, one entry per point, shaped like the scene.
    std::vector<GaussianGrad> m;
    std::vector<GaussianGrad> v;
    /// Steps taken per parameter group (bias correction).
    std::array<std::int64_t, kParamGroupCount> steps{};

    /// Zero moments for every point of `scene`.
    static AdamState for_scene(const Scene& scene);
    std::size_t point_count() const { return m.size(); }
};

/// Geometric interpolation from lr_position to lr_position_final over total_steps.
double position_lr(const TrainConfig& config, int iter);

/// Learning rate for one parameter group at `iter`. `position_scale`
/// multiplies the position rate (scene extent when enabled).
double group_lr(const TrainConfig& config, ParamGroup group, int iter, double position_scale = 1.0);

struct AdamOptions {
    double position_scale = 1.0;
    /// Leave curves and time dilation untouched (static warm-up).
    bool freeze_dynamics = false;
};

/// One Adam step with decoupled weight decay on every updated parameter;
/// q0 is renormalized afterwards. Throws Error naming the parameter group
/// when a gradient is not finite.
void adam_step(Scene& scene, const SceneGradient& grads, AdamState& state, const TrainConfig& config, int iter,
               const AdamOptions& options = {});

/// Screen-space positional gradient statistics accumulated between densifications.
struct DensifyStats {
    std::vector<double> grad_sum;
    std::vector<std::uint32_t> count;

    void reset(std::size_t points);
    void add(const BackwardStats& stats);
};

struct DensifyReport {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clone small and split large points whose mean screen-space gradient
/// exceeds the threshold, then prune nearly transparent points. New points
/// inherit every parameter of their parent and start with zero moments.
/// Resets `stats` for the new point count.
DensifyReport density_control(Scene& scene, DensifyStats& stats, AdamState& state, const TrainConfig& config,
                              double scene_extent, std::mt19937_64& rng);

/// 1.1 times the largest distance from the mean camera center; 1 when all
/// cameras coincide.
double camera_extent(std::span<const Frame> frames);

struct TrainLogRow {
    int iter = 0;
    double loss = 0.0;
    double l1 = 0.0;
    double ssim = 0.0;
    double tsmooth = 0.0;
    double rigid = 0.0;
    std::size_t points = 0;
    /// NaN on iterations without a held-out evaluation.
    double holdout_psnr = 0.0;
};

struct TrainHooks {
    /// Called after every completed iteration (1-based count).
    std::function<void(int completed, const Scene&)> on_iteration;
    /// Called every checkpoint_interval iterations.
    std::function<void(int completed, const Scene&)> on_checkpoint;
    std::function<void(const TrainLogRow&)> on_log;
    /// Defaults to printing on stderr.
    std::function<void(const std::string&)> on_warning;
};

struct TrainResult {
    Scene scene;
    std::vector<TrainLogRow> log;
    int knn_builds = 0;
    /// Iteration index at which the rigid index was (last) built, -1 if never.
    int knn_built_at = -1;
};

/// Distinct timestamps across the frames (at least 1).
int count_distinct_times(std::span<const Frame> frames);

TrainResult train(std::span<const Frame> frames, std::span<const Frame> holdout, std::span<const SeedPoint> seeds,
                  const TrainConfig& config, const TrainHooks& hooks = {});

/// Continue from an existing scene (no re-initialization).
TrainResult train_scene(Scene scene, std::span<const Frame> frames, std::span<const Frame> holdout,
                        const TrainConfig& config, const TrainHooks& hooks = {});

/// CSV with header iter,loss,l1,ssim,tsmooth,rigid,points,holdout_psnr.
std::string format_log_csv(std::span<const TrainLogRow> rows);

} // namespace splatflow
