// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/dddm.hpp"

#include <cmath>

namespace splatflow {

namespace {

constexpr double kDegenerateQuatNorm = 1e-8;

void check_normalized(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error("unnormalized timestamp");
}

} // namespace

double eval_poly(const ChannelCurve& curve, double ts) {
    const auto a = curve.poly_coeffs();
    double acc = 0.0;
    for (std::size_t n = a.size(); n-- > 0;) acc = acc * ts + a[n];
    return acc;
}

double eval_fourier(const ChannelCurve& curve, double ts) {
    const auto fs = curve.fourier_sin();
    const auto fc = curve.fourier_cos();
    double acc = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const double arg = double(i + 1) * ts;
        acc += fs[i] * std::cos(arg) + fc[i] * std::sin(arg);
    }
    return acc;
}

double scale_timestamp(double lambda_s, double lambda_b, double t) {
    check_normalized(t);
    return lambda_s * t + lambda_b;
}

double eval_residual(const ChannelCurve& curve, double lambda_s, double lambda_b, double t) {
    const double ts = scale_timestamp(lambda_s, lambda_b, t);
    return eval_poly(curve, ts) + eval_fourier(curve, ts);
}

ResidualGradient residual_gradients(const ChannelCurve& curve, double lambda_s, double lambda_b, double t) {
    check_normalized(t);
    TimeBasis basis(curve.poly_order(), curve.fourier_order());
    basis.update(lambda_s, lambda_b, t);

    ResidualGradient out;
    out.value = basis.evaluate(curve);
    out.d_ts = basis.derivative(curve);
    ChannelCurve grad(curve.poly_order(), curve.fourier_order());
    basis.accumulate(curve, 1.0, grad, out.d_lambda_s, out.d_lambda_b);
    out.d_coeffs.assign(grad.coeffs().begin(), grad.coeffs().end());
    return out;
}

void TimeBasis::resize(int poly_order, int fourier_order) {
    poly_order_ = poly_order;
    fourier_order_ = fourier_order;
    powers_.resize(std::size_t(poly_order + 1));
    cos_.resize(std::size_t(fourier_order));
    sin_.resize(std::size_t(fourier_order));
}

void TimeBasis::update(double lambda_s, double lambda_b, double t) {
    t_ = t;
    ts_ = lambda_s * t + lambda_b;
    double p = 1.0;
    for (auto& v : powers_) {
        v = p;
        p *= ts_;
    }
    for (int l = 0; l < fourier_order_; ++l) {
        const double arg = double(l + 1) * ts_;
        cos_[l] = std::cos(arg);
        sin_[l] = std::sin(arg);
    }
}

double TimeBasis::evaluate(const ChannelCurve& curve) const {
    double acc = eval_poly(curve, ts_);
    const auto fs = curve.fourier_sin();
    const auto fc = curve.fourier_cos();
    for (int l = 0; l < fourier_order_; ++l) acc += fs[l] * cos_[l] + fc[l] * sin_[l];
    return acc;
}

double TimeBasis::derivative(const ChannelCurve& curve) const {
    const auto a = curve.poly_coeffs();
    double acc = 0.0;
    for (int n = 1; n <= poly_order_; ++n) acc += double(n) * a[n] * powers_[n - 1];
    const auto fs = curve.fourier_sin();
    const auto fc = curve.fourier_cos();
    for (int l = 0; l < fourier_order_; ++l) {
        acc += double(l + 1) * (-fs[l] * sin_[l] + fc[l] * cos_[l]);
    }
    return acc;
}

void TimeBasis::accumulate(const ChannelCurve& curve, double upstream, ChannelCurve& grad_curve,
                           double& grad_lambda_s, double& grad_lambda_b) const {
    if (upstream == 0.0) return;
    auto ga = grad_curve.poly_coeffs();
    for (int n = 0; n <= poly_order_; ++n) ga[n] += upstream * powers_[n];
    auto gs = grad_curve.fourier_sin();
    auto gc = grad_curve.fourier_cos();
    for (int l = 0; l < fourier_order_; ++l) {
        gs[l] += upstream * cos_[l];
        gc[l] += upstream * sin_[l];
    }
    const double d_ts = upstream * derivative(curve);
    grad_lambda_s += d_ts * t_;
    grad_lambda_b += d_ts;
}

DeformedAttributes deform_point(const DynamicGaussian& p, double t) {
    check_normalized(t);
    TimeBasis basis(p.curves_mu[0].poly_order(), p.curves_mu[0].fourier_order());
    basis.update(p.dilation_scale, p.dilation_base, t);
    return deform_point(p, basis);
}

DeformedAttributes deform_point(const DynamicGaussian& p, const TimeBasis& basis, Quat* raw_q) {
    DeformedAttributes out;
    for (int i = 0; i < kPositionChannels; ++i) out.mu_t[i] = p.mu0[i] + basis.evaluate(p.curves_mu[i]);

    Quat q;
    for (int i = 0; i < kRotationChannels; ++i) q[i] = p.q0[i] + basis.evaluate(p.curves_q[i]);
    const double norm = q.norm();
    if (!(norm >= kDegenerateQuatNorm)) throw Error("degenerate rotation");
    out.q_t = q / norm;
    if (raw_q) *raw_q = q;

    for (int i = 0; i < kColorChannels; ++i) out.dc_t[i] = p.sh_coeffs[i] + basis.evaluate(p.curves_c[i]);
    return out;
}

void deform_backward(const DynamicGaussian& p, const TimeBasis& basis, const Quat& raw_q, const Vec3& d_mu_t,
                     const Quat& d_q_t, const Vec3& d_dc_t, GaussianGrad& grad) {
    for (int i = 0; i < kPositionChannels; ++i) {
        grad.mu0[i] += d_mu_t[i];
        basis.accumulate(p.curves_mu[i], d_mu_t[i], grad.curves_mu[i], grad.dilation_scale, grad.dilation_base);
    }

    // q_t = raw / |raw|  =>  d raw = (I - q_t q_t^T) d q_t / |raw|
    const double norm = raw_q.norm();
    const Quat qn = raw_q / norm;
    const Quat d_raw = (d_q_t - qn * qn.dot(d_q_t)) / norm;
    for (int i = 0; i < kRotationChannels; ++i) {
        grad.q0[i] += d_raw[i];
        basis.accumulate(p.curves_q[i], d_raw[i], grad.curves_q[i], grad.dilation_scale, grad.dilation_base);
    }

    for (int i = 0; i < kColorChannels; ++i) {
        grad.sh_coeffs[i] += d_dc_t[i];
        basis.accumulate(p.curves_c[i], d_dc_t[i], grad.curves_c[i], grad.dilation_scale, grad.dilation_base);
    }
}

} // namespace splatflow
