// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/curve_fit.hpp"

#include "splatflow/dddm.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>

namespace splatflow {

namespace {

Eigen::MatrixXd design_matrix(std::span<const double> t, const ChannelCurve& shape, double ls, double lb) {
    TimeBasis basis(shape.poly_order(), shape.fourier_order());
    Eigen::MatrixXd a(Eigen::Index(t.size()), Eigen::Index(shape.size()));
    ChannelCurve row = shape;
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::fill(row.coeffs().begin(), row.coeffs().end(), 0.0);
        double dls = 0.0, dlb = 0.0;
        basis.update(ls, lb, t[i]);
        basis.accumulate(shape, 1.0, row, dls, dlb);
        for (std::size_t k = 0; k < row.size(); ++k) a(Eigen::Index(i), Eigen::Index(k)) = row.coeffs()[k];
    }
    return a;
}

std::vector<double> evaluate(std::span<const double> t, const ChannelCurve& c, double ls, double lb) {
    TimeBasis basis(c.poly_order(), c.fourier_order());
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        basis.update(ls, lb, t[i]);
        out[i] = basis.evaluate(c);
    }
    return out;
}

void draw_dot(Image& img, double x, double y, const Vec3& color, int radius) {
    const int cx = int(std::lround(x)), cy = int(std::lround(y));
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            const int px = cx + dx, py = cy + dy;
            if (px < 0 || py < 0 || px >= img.width || py >= img.height || dx * dx + dy * dy > radius * radius) continue;
            for (int c = 0; c < 3; ++c) img.at(px, py, c) = color[c];
        }
    }
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, const Vec3& color) {
    const int steps = std::max(1, int(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) * 2.0)));
    for (int s = 0; s <= steps; ++s) {
        const double f = double(s) / steps;
        draw_dot(img, x0 + f * (x1 - x0), y0 + f * (y1 - y0), color, 1);
    }
}

} // namespace

CurveModel parse_curve_model(std::string_view name) {
    if (name == "poly") return CurveModel::Poly;
    if (name == "fourier") return CurveModel::Fourier;
    if (name == "dddm") return CurveModel::Dddm;
    throw Error("unknown curve model '" + std::string(name) + "' (expected poly, fourier or dddm)");
}

CurveSolver parse_curve_solver(std::string_view name) {
    if (name == "lstsq") return CurveSolver::Lstsq;
    if (name == "adam") return CurveSolver::Adam;
    throw Error("unknown solver '" + std::string(name) + "' (expected lstsq or adam)");
}

ChannelCurve curve_for_model(const CurveFitOptions& o) {
    if (o.poly_order < 0 || o.fourier_order < 0) throw Error("curve orders must be >= 0");
    switch (o.model) {
    case CurveModel::Poly: return ChannelCurve(o.poly_order, 0);
    case CurveModel::Fourier: return ChannelCurve(0, o.fourier_order);
    case CurveModel::Dddm: return ChannelCurve(o.poly_order, o.fourier_order);
    }
    return {};
}

CurveFitOptions matched_budget(CurveModel model, int poly_order, int fourier_order, double dilation) {
    CurveFitOptions o;
    o.model = model;
    o.dilation = dilation;
    o.poly_order = poly_order;
    o.fourier_order = fourier_order;
    if (model == CurveModel::Poly) o.poly_order = poly_order + 2 * fourier_order;
    if (model == CurveModel::Fourier) o.fourier_order = (poly_order + 2 * fourier_order) / 2;
    return o;
}

CurveFitResult fit_curve(std::span<const double> t, std::span<const double> y, const CurveFitOptions& o) {
    if (t.size() != y.size()) throw Error("trajectory times and values differ in length");
    if (t.empty()) throw Error("trajectory is empty");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] >= 0.0 && t[i] <= 1.0)) throw Error("trajectory times must lie in [0, 1]");
        if (!std::isfinite(y[i])) throw Error("trajectory value at row " + std::to_string(i) + " is not finite");
    }
    CurveFitResult r;
    r.curve = curve_for_model(o);
    r.lambda_s = o.dilation;
    r.lambda_b = 0.0;

    if (o.solver == CurveSolver::Lstsq) {
        Eigen::MatrixXd a = design_matrix(t, r.curve, r.lambda_s, r.lambda_b);
        const Eigen::Map<const Eigen::VectorXd> b(y.data(), Eigen::Index(y.size()));
        // Equilibrate columns; high-order monomials span many magnitudes.
        Eigen::VectorXd scale = a.colwise().norm().transpose();
        for (Eigen::Index k = 0; k < scale.size(); ++k) {
            if (scale[k] == 0.0) scale[k] = 1.0;
        }
        a = a * scale.cwiseInverse().asDiagonal();
        const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b).cwiseQuotient(scale);
        for (std::size_t k = 0; k < r.curve.size(); ++k) r.curve.coeffs()[k] = x[Eigen::Index(k)];
    } else {
        const std::size_t n = r.curve.size();
        std::vector<double> m(n + 2, 0.0), v(n + 2, 0.0), g(n + 2, 0.0);
        const double b1 = 0.9, b2 = 0.999, eps = 1e-12;
        TimeBasis basis(r.curve.poly_order(), r.curve.fourier_order());
        ChannelCurve grad = r.curve;
        for (int step = 1; step <= o.adam_steps; ++step) {
            std::fill(grad.coeffs().begin(), grad.coeffs().end(), 0.0);
            double gls = 0.0, glb = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                basis.update(r.lambda_s, r.lambda_b, t[i]);
                const double up = 2.0 * (basis.evaluate(r.curve) - y[i]) / double(t.size());
                basis.accumulate(r.curve, up, grad, gls, glb);
            }
            std::copy(grad.coeffs().begin(), grad.coeffs().end(), g.begin());
            g[n] = o.learn_dilation ? gls : 0.0;
            g[n + 1] = o.learn_dilation ? glb : 0.0;
            const double bc1 = 1.0 - std::pow(b1, step), bc2 = 1.0 - std::pow(b2, step);
            for (std::size_t k = 0; k < n + 2; ++k) {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                const double delta = o.adam_lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
                if (k < n) {
                    r.curve.coeffs()[k] -= delta;
                } else if (k == n) {
                    r.lambda_s -= delta;
                } else {
                    r.lambda_b -= delta;
                }
            }
        }
    }
    r.fitted = evaluate(t, r.curve, r.lambda_s, r.lambda_b);
    double sq = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) sq += (r.fitted[i] - y[i]) * (r.fitted[i] - y[i]);
    r.rmse = std::sqrt(sq / double(t.size()));
    return r;
}

Image plot_series(std::span<const double> t, std::span<const double> samples, std::span<const std::vector<double>> fits,
                  int width, int height) {
    if (t.size() != samples.size()) throw Error("plot series lengths differ");
    for (const auto& f : fits) {
        if (f.size() != t.size()) throw Error("plot series lengths differ");
    }
    Image img(width, height, 1.0);
    if (t.empty()) return img;
    double lo = *std::min_element(samples.begin(), samples.end());
    double hi = *std::max_element(samples.begin(), samples.end());
    for (const auto& f : fits) {
        lo = std::min(lo, *std::min_element(f.begin(), f.end()));
        hi = std::max(hi, *std::max_element(f.begin(), f.end()));
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double margin = 24.0;
    auto px = [&](double tv) { return margin + tv * (width - 2.0 * margin); };
    auto py = [&](double yv) { return height - margin - (yv - lo) / (hi - lo) * (height - 2.0 * margin); };

    const Vec3 axis(0.2, 0.2, 0.2);
    draw_line(img, margin, height - margin, width - margin, height - margin, axis);
    draw_line(img, margin, margin, margin, height - margin, axis);
    if (lo < 0.0 && hi > 0.0) draw_line(img, margin, py(0.0), width - margin, py(0.0), Vec3(0.8, 0.8, 0.8));

    for (std::size_t i = 0; i < t.size(); ++i) draw_dot(img, px(t[i]), py(samples[i]), Vec3(0.55, 0.55, 0.55), 2);
    const Vec3 palette[] = {Vec3(0.85, 0.1, 0.1), Vec3(0.1, 0.6, 0.1), Vec3(0.1, 0.2, 0.85), Vec3(0.9, 0.55, 0.0)};
    for (std::size_t f = 0; f < fits.size(); ++f) {
        const Vec3& color = palette[f % 4];
        for (std::size_t i = 1; i < t.size(); ++i) {
            draw_line(img, px(t[i - 1]), py(fits[f][i - 1]), px(t[i]), py(fits[f][i]), color);
        }
    }
    return img;
}

} // namespace splatflow
