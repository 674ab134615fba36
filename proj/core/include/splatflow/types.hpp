// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared by every splatflow module.
//
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Quaternions are stored as (w, x, y, z).
using Quat = Vec4;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Coefficients of one scalar channel's deformation residual: a polynomial of
/// order N plus an L-term Fourier series. Stored contiguously as
/// [a_0..a_N | sin_1..sin_L | cos_1..cos_L].
class ChannelCurve {
public:
    ChannelCurve() : ChannelCurve(0, 0) {}
    ChannelCurve(int poly_order, int fourier_order);

    int poly_order() const { return poly_order_; }
    int fourier_order() const { return fourier_order_; }
    std::size_t size() const { return coeffs_.size(); }

    std::span<double> coeffs() { return coeffs_; }
    std::span<const double> coeffs() const { return coeffs_; }

    std::span<double> poly_coeffs() { return coeffs().subspan(0, poly_order_ + 1); }
    std::span<const double> poly_coeffs() const { return coeffs().subspan(0, poly_order_ + 1); }
    std::span<double> fourier_sin() { return coeffs().subspan(poly_order_ + 1, fourier_order_); }
    std::span<const double> fourier_sin() const { return coeffs().subspan(poly_order_ + 1, fourier_order_); }
    std::span<double> fourier_cos() {
        return coeffs().subspan(poly_order_ + 1 + fourier_order_, fourier_order_);
    }
    std::span<const double> fourier_cos() const {
        return coeffs().subspan(poly_order_ + 1 + fourier_order_, fourier_order_);
    }

    bool is_zero() const;
    bool is_finite() const;

    friend bool operator==(const ChannelCurve&, const ChannelCurve&) = default;

private:
    int poly_order_;
    int fourier_order_;
    std::vector<double> coeffs_;
};

inline constexpr int kPositionChannels = 3;
inline constexpr int kRotationChannels = 4;
inline constexpr int kColorChannels = 3;
inline constexpr int kCurveChannels = kPositionChannels + kRotationChannels + kColorChannels;

/// Number of SH basis functions per color channel for a given degree.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// One soft point. Base attributes live at the reference time; position,
/// rotation and DC color carry one deformation curve per component. Scale and
/// opacity are static.
struct DynamicGaussian {
    Vec3 mu0 = Vec3::Zero();
    Quat q0 = Quat(1.0, 0.0, 0.0, 0.0);
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    /// Basis-major layout: sh_coeffs[k * 3 + channel]. The first three entries are the DC terms.
    std::vector<double> sh_coeffs;
    std::array<ChannelCurve, kPositionChannels> curves_mu;
    std::array<ChannelCurve, kRotationChannels> curves_q;
    std::array<ChannelCurve, kColorChannels> curves_c;
    double dilation_scale = 1.0;
    double dilation_base = 0.0;

    DynamicGaussian() = default;
    DynamicGaussian(int poly_order, int fourier_order, int sh_degree);

    /// All ten curves in (mu, q, c) order.
    ChannelCurve& curve(int channel);
    const ChannelCurve& curve(int channel) const;

    friend bool operator==(const DynamicGaussian&, const DynamicGaussian&) = default;
};

/// Gradients share the parameter layout of the point they belong to.
using GaussianGrad = DynamicGaussian;

/// Same shape as `p`, every value zero (dilation included).
GaussianGrad zeros_like(const DynamicGaussian& p);
void set_zero(GaussianGrad& g);

enum class ParamGroup {
    Position,
    Rotation,
    Scaling,
    Opacity,
    ShDc,
    ShRest,
    Dddm,
    Dilation,
};

const char* to_string(ParamGroup group);

struct ParamBlock {
    ParamGroup group;
    std::span<double> values;
};

inline constexpr std::size_t kParamBlockCount = 6 + kCurveChannels + 2;

/// Every optimizable value of a point, grouped for the optimizer. The order is
/// fixed so that blocks of two identically shaped points line up.
std::array<ParamBlock, kParamBlockCount> param_blocks(DynamicGaussian& p);

struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    /// Rigid world-to-camera transform. Camera looks down +z, x right, y down.
    Mat4 world_to_cam = Mat4::Identity();
    double znear = 0.01;
    double zfar = 100.0;

    Mat3 rotation() const { return world_to_cam.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_cam.topRightCorner<3, 1>(); }
    /// Camera center in world coordinates.
    Vec3 center() const { return -rotation().transpose() * translation(); }

    /// Throws Error when an invariant is violated.
    void validate() const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                          int height);
};

/// Interleaved HWC image with values nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

    double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
    std::size_t pixel_count() const { return std::size_t(width) * height; }
};

struct Frame {
    Camera camera;
    Image image;
    double t = 0.0;
};

struct Scene {
    std::vector<DynamicGaussian> points;
    int frame_count = 1;
    int sh_degree = 3;
    int poly_order = 3;
    int fourier_order = 16;

    /// Throws Error when points disagree with the scene-wide orders.
    void validate() const;
};

using SceneGradient = std::vector<GaussianGrad>;

SceneGradient zeros_like(const Scene& scene);
void set_zero(SceneGradient& grads);

double sigmoid(double x);
double logit(double p);

} // namespace splatflow
