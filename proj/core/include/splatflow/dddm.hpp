// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Dual-domain deformation: every deformable channel carries a residual
//
//     D(t) = sum_n a_n ts^n + sum_l ( sin_l * cos(l ts) + cos_l * sin(l ts) ),
//     ts   = lambda_s * t + lambda_b,
//
// added to the base attribute. The coefficient naming in the Fourier term
// follows the published formula, where the "sin" coefficient multiplies the
// cosine basis and vice versa. Both are free parameters, so nothing depends on
// the pairing besides file layout.
//
#pragma once

#include "splatflow/types.hpp"

#include <vector>

namespace splatflow {

struct DeformedAttributes {
    Vec3 mu_t = Vec3::Zero();
    Quat q_t = Quat(1.0, 0.0, 0.0, 0.0);
    Vec3 dc_t = Vec3::Zero();
};

/// Horner evaluation of the polynomial part.
double eval_poly(const ChannelCurve& curve, double ts);
double eval_fourier(const ChannelCurve& curve, double ts);

/// lambda_s * t + lambda_b. Throws Error("unnormalized timestamp") unless t is in [0, 1].
double scale_timestamp(double lambda_s, double lambda_b, double t);

double eval_residual(const ChannelCurve& curve, double lambda_s, double lambda_b, double t);

DeformedAttributes deform_point(const DynamicGaussian& p, double t);

struct ResidualGradient {
    double value = 0.0;
    /// Same layout as ChannelCurve::coeffs().
    std::vector<double> d_coeffs;
    double d_ts = 0.0;
    double d_lambda_s = 0.0;
    double d_lambda_b = 0.0;
};

ResidualGradient residual_gradients(const ChannelCurve& curve, double lambda_s, double lambda_b, double t);

/// Basis functions of one point at one timestamp, shared by all of its
/// channels. Unlike the public entry points above this does not insist on
/// t in [0, 1]; the smoothness regularizer evaluates at t + epsilon.
class TimeBasis {
public:
    TimeBasis() = default;
    TimeBasis(int poly_order, int fourier_order) { resize(poly_order, fourier_order); }

    void resize(int poly_order, int fourier_order);
    void update(double lambda_s, double lambda_b, double t);

    double t() const { return t_; }
    double ts() const { return ts_; }

    /// D(t) for one curve.
    double evaluate(const ChannelCurve& curve) const;
    /// dD/dts for one curve.
    double derivative(const ChannelCurve& curve) const;
    /// grad_curve += upstream * dD/dcoeffs, grad_ls/lb += upstream * dD/dlambda.
    void accumulate(const ChannelCurve& curve, double upstream, ChannelCurve& grad_curve, double& grad_lambda_s,
                    double& grad_lambda_b) const;

private:
    int poly_order_ = 0;
    int fourier_order_ = 0;
    double t_ = 0.0;
    double ts_ = 0.0;
    std::vector<double> powers_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

/// Deformation using a precomputed basis. `raw_q` receives q0 + residual
/// before normalization (needed by the backward pass).
DeformedAttributes deform_point(const DynamicGaussian& p, const TimeBasis& basis, Quat* raw_q = nullptr);

/// Backpropagate gradients of the deformed attributes into the point's base
/// attributes, curves and dilation. `raw_q` is the unnormalized quaternion.
void deform_backward(const DynamicGaussian& p, const TimeBasis& basis, const Quat& raw_q, const Vec3& d_mu_t,
                     const Quat& d_q_t, const Vec3& d_dc_t, GaussianGrad& grad);

} // namespace splatflow
