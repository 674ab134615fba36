// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/config.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

namespace splatflow {

namespace {

using nlohmann::json;

#define SPLATFLOW_CONFIG_FIELDS(X)                                                                                 \
    X(total_steps)                                                                                                 \
    X(warmup_static_steps)                                                                                         \
    X(densify_start)                                                                                               \
    X(densify_end)                                                                                                 \
    X(densify_interval)                                                                                            \
    X(knn_offset)                                                                                                  \
    X(alt_cadence)                                                                                                 \
    X(lr_position)                                                                                                 \
    X(lr_position_final)                                                                                           \
    X(scale_position_lr_by_extent)                                                                                 \
    X(lr_rotation)                                                                                                 \
    X(lr_scaling)                                                                                                  \
    X(lr_opacity)                                                                                                  \
    X(lr_sh_dc)                                                                                                    \
    X(lr_sh_rest)                                                                                                  \
    X(lr_dddm)                                                                                                     \
    X(weight_decay)                                                                                                \
    X(adam_beta1)                                                                                                  \
    X(adam_beta2)                                                                                                  \
    X(adam_eps)                                                                                                    \
    X(poly_order)                                                                                                  \
    X(fourier_order)                                                                                               \
    X(sh_degree)                                                                                                   \
    X(knn_k)                                                                                                       \
    X(w_tsmooth)                                                                                                   \
    X(w_rigid)                                                                                                     \
    X(w_ssim)                                                                                                      \
    X(densify_grad_threshold)                                                                                      \
    X(percent_dense)                                                                                               \
    X(prune_opacity)                                                                                               \
    X(split_scale_divisor)                                                                                         \
    X(split_children)                                                                                              \
    X(init_opacity)                                                                                                \
    X(alpha_clamp)                                                                                                 \
    X(cov_dilation)                                                                                                \
    X(transmittance_threshold)                                                                                     \
    X(background)                                                                                                  \
    X(seed)                                                                                                        \
    X(threads)                                                                                                     \
    X(eval_interval)                                                                                               \
    X(checkpoint_interval)

void require(bool ok, const std::string& what) {
    if (!ok) throw Error("invalid config: " + what);
}

} // namespace

void TrainConfig::validate() const {
    require(total_steps >= 0, "total_steps must be >= 0");
    if (total_steps > 0) {
        require(warmup_static_steps < densify_end, "warmup_static_steps must be < densify_end");
        require(densify_end < total_steps, "densify_end must be < total_steps");
    }
    require(warmup_static_steps >= 0, "warmup_static_steps must be >= 0");
    require(densify_start >= 0 && densify_interval > 0, "densify_start >= 0 and densify_interval > 0");
    require(knn_offset >= 0 && alt_cadence >= 0, "knn_offset and alt_cadence must be >= 0");
    for (double lr : {lr_position, lr_position_final, lr_rotation, lr_scaling, lr_opacity, lr_sh_dc, lr_sh_rest,
                      lr_dddm}) {
        require(lr > 0.0 && std::isfinite(lr), "learning rates must be positive");
    }
    require(weight_decay >= 0.0, "weight_decay must be >= 0");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas in [0,1)");
    require(adam_eps > 0.0, "adam_eps must be positive");
    require(poly_order >= 0 && fourier_order >= 0, "curve orders must be >= 0");
    require(sh_degree >= 0 && sh_degree <= 3, "sh_degree must be in [0,3]");
    require(knn_k >= 1, "knn_k must be >= 1");
    require(w_tsmooth >= 0.0 && w_rigid >= 0.0, "regularizer weights must be >= 0");
    require(w_ssim >= 0.0 && w_ssim <= 1.0, "w_ssim must be in [0,1]");
    require(densify_grad_threshold > 0.0 && percent_dense > 0.0, "densify thresholds must be positive");
    require(prune_opacity >= 0.0 && prune_opacity < 1.0, "prune_opacity must be in [0,1)");
    require(split_scale_divisor > 1.0 && split_children >= 2, "split_scale_divisor > 1 and split_children >= 2");
    require(init_opacity > 0.0 && init_opacity < 1.0, "init_opacity must be in (0,1)");
    require(alpha_clamp > 0.0 && alpha_clamp < 1.0, "alpha_clamp must be in (0,1)");
    require(cov_dilation >= 0.0 && transmittance_threshold >= 0.0, "dilation and threshold must be >= 0");
    for (double b : background) require(b >= 0.0 && b <= 1.0, "background must be in [0,1]");
    require(eval_interval >= 0 && checkpoint_interval >= 0, "intervals must be >= 0");
}

RenderSettings TrainConfig::render_settings() const {
    RenderSettings s;
    s.alpha_clamp = alpha_clamp;
    s.cov_dilation = cov_dilation;
    s.transmittance_threshold = transmittance_threshold;
    s.threads = threads;
    return s;
}

TrainConfig TrainConfig::with_steps(int steps) const {
    TrainConfig c = *this;
    c.total_steps = steps;
    if (steps > densify_end || total_steps <= 0) return c;
    const double f = double(steps) / double(total_steps);
    c.warmup_static_steps = int(std::lround(warmup_static_steps * f));
    c.densify_start = int(std::lround(densify_start * f));
    c.densify_end = int(std::lround(densify_end * f));
    return c;
}

TrainConfig TrainConfig::for_steps(int steps) { return TrainConfig{}.with_steps(steps); }

std::string to_json(const TrainConfig& config) {
    json j;
#define X(name) j[#name] = config.name;
    SPLATFLOW_CONFIG_FIELDS(X)
#undef X
    return j.dump(2);
}

TrainConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("invalid config: ") + e.what());
    }
    if (!j.is_object()) throw Error("invalid config: expected a JSON object");

    TrainConfig c;
    std::set<std::string> known;
#define X(name) known.insert(#name);
    SPLATFLOW_CONFIG_FIELDS(X)
#undef X
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw Error("invalid config: unknown key '" + key + "'");
    }
    try {
#define X(name)                                                                                                    \
    if (j.contains(#name)) j.at(#name).get_to(c.name);
        SPLATFLOW_CONFIG_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
        throw Error(std::string("invalid config: ") + e.what());
    }
    return c;
}

} // namespace splatflow
