// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/types.hpp"

#include <algorithm>
#include <cmath>

namespace splatflow {

ChannelCurve::ChannelCurve(int poly_order, int fourier_order)
    : poly_order_(poly_order), fourier_order_(fourier_order) {
    if (poly_order < 0 || fourier_order < 0) {
        throw Error("curve orders must be non-negative");
    }
    coeffs_.assign(std::size_t(poly_order + 1 + 2 * fourier_order), 0.0);
}

bool ChannelCurve::is_zero() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double v) { return v == 0.0; });
}

bool ChannelCurve::is_finite() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double v) { return std::isfinite(v); });
}

DynamicGaussian::DynamicGaussian(int poly_order, int fourier_order, int sh_degree)
    : sh_coeffs(std::size_t(sh_basis_count(sh_degree)) * 3, 0.0) {
    for (int c = 0; c < kCurveChannels; ++c) {
        curve(c) = ChannelCurve(poly_order, fourier_order);
    }
}

ChannelCurve& DynamicGaussian::curve(int channel) {
    if (channel < kPositionChannels) return curves_mu[channel];
    channel -= kPositionChannels;
    if (channel < kRotationChannels) return curves_q[channel];
    return curves_c.at(channel - kRotationChannels);
}

const ChannelCurve& DynamicGaussian::curve(int channel) const {
    return const_cast<DynamicGaussian*>(this)->curve(channel);
}

GaussianGrad zeros_like(const DynamicGaussian& p) {
    GaussianGrad g = p;
    set_zero(g);
    return g;
}

void set_zero(GaussianGrad& g) {
    for (auto& block : param_blocks(g)) {
        std::fill(block.values.begin(), block.values.end(), 0.0);
    }
}

const char* to_string(ParamGroup group) {
    switch (group) {
    case ParamGroup::Position: return "position";
    case ParamGroup::Rotation: return "rotation";
    case ParamGroup::Scaling: return "scaling";
    case ParamGroup::Opacity: return "opacity";
    case ParamGroup::ShDc: return "sh_dc";
    case ParamGroup::ShRest: return "sh_rest";
    case ParamGroup::Dddm: return "dddm";
    case ParamGroup::Dilation: return "dilation";
    }
    return "unknown";
}

std::array<ParamBlock, kParamBlockCount> param_blocks(DynamicGaussian& p) {
    const std::size_t dc = std::min<std::size_t>(3, p.sh_coeffs.size());
    std::span<double> sh(p.sh_coeffs);
    std::array<ParamBlock, kParamBlockCount> blocks{
        ParamBlock{ParamGroup::Position, {p.mu0.data(), 3}},
        ParamBlock{ParamGroup::Rotation, {p.q0.data(), 4}},
        ParamBlock{ParamGroup::Scaling, {p.log_scale.data(), 3}},
        ParamBlock{ParamGroup::Opacity, {&p.opacity_logit, 1}},
        ParamBlock{ParamGroup::ShDc, sh.subspan(0, dc)},
        ParamBlock{ParamGroup::ShRest, sh.subspan(dc)},
    };
    for (int c = 0; c < kCurveChannels; ++c) {
        blocks[6 + c] = ParamBlock{ParamGroup::Dddm, p.curve(c).coeffs()};
    }
    blocks[6 + kCurveChannels] = ParamBlock{ParamGroup::Dilation, {&p.dilation_scale, 1}};
    blocks[7 + kCurveChannels] = ParamBlock{ParamGroup::Dilation, {&p.dilation_base, 1}};
    return blocks;
}

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error("camera focal lengths must be positive");
    if (!(znear > 0.0)) throw Error("camera znear must be positive");
    if (!(zfar > znear)) throw Error("camera zfar must exceed znear");
    if (width <= 0 || height <= 0) throw Error("camera dimensions must be positive");
    const Mat3 r = rotation();
    if (!(r * r.transpose() - Mat3::Identity()).isZero(1e-6) || r.determinant() < 0.0) {
        throw Error("camera rotation is not orthonormal");
    }
    if (!world_to_cam.allFinite()) throw Error("camera pose is not finite");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                       int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) throw Error("look_at: up vector parallel to view direction");
    right.normalize();
    const Vec3 down = forward.cross(right);

    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_cam.setIdentity();
    cam.world_to_cam.topLeftCorner<3, 3>() = r;
    cam.world_to_cam.topRightCorner<3, 1>() = -r * eye;
    return cam;
}

void Scene::validate() const {
    if (frame_count < 1) throw Error("scene frame_count must be >= 1");
    const std::size_t sh_size = std::size_t(sh_basis_count(sh_degree)) * 3;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (p.sh_coeffs.size() != sh_size) {
            throw Error("point " + std::to_string(i) + " has mismatched SH layout");
        }
        for (int c = 0; c < kCurveChannels; ++c) {
            const auto& curve = p.curve(c);
            if (curve.poly_order() != poly_order || curve.fourier_order() != fourier_order) {
                throw Error("point " + std::to_string(i) + " has mismatched curve orders");
            }
        }
    }
}

SceneGradient zeros_like(const Scene& scene) {
    SceneGradient grads;
    grads.reserve(scene.points.size());
    for (const auto& p : scene.points) grads.push_back(zeros_like(p));
    return grads;
}

void set_zero(SceneGradient& grads) {
    for (auto& g : grads) set_zero(g);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace splatflow
