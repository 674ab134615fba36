// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatflow/rasterizer.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace splatflow {

/// Every schedule constant, learning rate, order, weight and threshold used by
/// training. Defaults reproduce the 30K-step recipe.
struct TrainConfig {
    // Schedule.
    int total_steps = 30000;
    int warmup_static_steps = 2000;
    int densify_start = 500;
    int densify_end = 15000;
    int densify_interval = 100;
    /// Rigid loss starts this many iterations after densify_end.
    int knn_offset = 0;
    /// 0: one densification phase followed by one rigid phase. >0: alternate
    /// phases of this many iterations before densify_end.
    int alt_cadence = 0;

    // Learning rates.
    double lr_position = 4e-4;
    double lr_position_final = 8e-7;
    bool scale_position_lr_by_extent = true;
    double lr_rotation = 2e-3;
    double lr_scaling = 5e-3;
    double lr_opacity = 5e-2;
    double lr_sh_dc = 2.5e-3;
    double lr_sh_rest = 2.5e-3 / 20.0;
    /// Curve coefficients and the per-point time dilation.
    double lr_dddm = 4e-4;
    double weight_decay = 8e-7;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    // Model.
    int poly_order = 3;
    int fourier_order = 16;
    int sh_degree = 3;
    int knn_k = 8;

    // Loss weights.
    double w_tsmooth = 0.05;
    double w_rigid = 0.05;
    double w_ssim = 0.2;

    // Adaptive density control.
    double densify_grad_threshold = 2e-4;
    /// Clone below, split above this fraction of the scene extent.
    double percent_dense = 0.01;
    double prune_opacity = 0.005;
    double split_scale_divisor = 1.6;
    int split_children = 2;
    double init_opacity = 0.1;

    // Rendering.
    double alpha_clamp = 0.99;
    double cov_dilation = 0.3;
    double transmittance_threshold = 1e-4;
    std::array<double, 3> background{0.0, 0.0, 0.0};

    // Bookkeeping.
    std::uint64_t seed = 0;
    int threads = 0;
    int eval_interval = 500;
    int checkpoint_interval = 0;

    /// Throws Error describing the first violated invariant.
    void validate() const;

    RenderSettings render_settings() const;

    /// Copy with `steps` iterations. Schedules longer than densify_end keep
    /// the absolute milestones; shorter ones scale warm-up and the densification
    /// window by steps / total_steps. The densification interval is kept.
    TrainConfig with_steps(int steps) const;
    /// Defaults rescheduled to `steps` iterations.
    static TrainConfig for_steps(int steps);

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string to_json(const TrainConfig& config);
/// Throws Error on malformed JSON, unknown keys or wrong types.
TrainConfig config_from_json(std::string_view text);

} // namespace splatflow
