// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include <splatflow/curve_fit.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace splatflow;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> grid(int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[std::size_t(i)] = double(i) / (n - 1);
    return t;
}

} // namespace

TEST(CurveFit, CubicIsExactForPoly) {
    const auto t = grid(50);
    std::vector<double> y;
    for (double v : t) y.push_back(0.3 - 1.2 * v + 0.7 * v * v + 2.5 * v * v * v);
    CurveFitOptions o;
    o.model = CurveModel::Poly;
    o.poly_order = 3;
    const CurveFitResult r = fit_curve(t, y, o);
    EXPECT_LE(r.rmse, 1e-6);
    EXPECT_NEAR(r.curve.poly_coeffs()[3], 2.5, 1e-8);
}

TEST(CurveFit, HarmonicIsExactForFourier) {
    const auto t = grid(64);
    std::vector<double> y;
    for (double v : t) y.push_back(0.4 * std::cos(kTwoPi * 2.0 * v) - 0.1 * std::sin(kTwoPi * v));
    CurveFitOptions o;
    o.model = CurveModel::Fourier;
    o.fourier_order = 3;
    o.dilation = kTwoPi;
    const CurveFitResult r = fit_curve(t, y, o);
    EXPECT_LE(r.rmse, 1e-6);
    // fourier_sin holds the cosine amplitudes (see ChannelCurve).
    EXPECT_NEAR(r.curve.fourier_sin()[1], 0.4, 1e-8);
    EXPECT_NEAR(r.curve.fourier_cos()[0], -0.1, 1e-8);
}

TEST(CurveFit, CompositeFavoursDddmAtMatchedBudget) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 0.01);
    const auto t = grid(120);
    std::vector<double> y;
    for (double v : t) {
        y.push_back(0.2 + 0.5 * v - 0.8 * v * v * v + 0.3 * std::sin(kTwoPi * 2 * v) +
                    0.15 * std::cos(kTwoPi * 3 * v + 0.4) + noise(rng));
    }
    double rmse[3];
    for (int m = 0; m < 3; ++m) {
        const CurveFitOptions o = matched_budget(CurveModel(m), 3, 8, kTwoPi);
        EXPECT_LE(curve_for_model(o).size(), 20u);
        rmse[m] = fit_curve(t, y, o).rmse;
    }
    EXPECT_LE(rmse[2], std::min(rmse[0], rmse[1]));
    EXPECT_LT(rmse[2], 0.011);
}

TEST(CurveFit, MatchedBudgetOrders) {
    const auto poly = matched_budget(CurveModel::Poly, 3, 8, 1.0);
    const auto fourier = matched_budget(CurveModel::Fourier, 3, 8, 1.0);
    const auto dddm = matched_budget(CurveModel::Dddm, 3, 8, 1.0);
    EXPECT_EQ(curve_for_model(poly).size(), 20u);
    EXPECT_EQ(curve_for_model(fourier).size(), 19u);
    EXPECT_EQ(curve_for_model(dddm).size(), 20u);
    EXPECT_EQ(curve_for_model(fourier).fourier_order(), 9);
}

TEST(CurveFit, AdamMatchesLeastSquaresOnLowOrder) {
    const auto t = grid(40);
    std::vector<double> y;
    for (double v : t) y.push_back(0.5 * v + 0.25 * std::sin(kTwoPi * v));
    CurveFitOptions o;
    o.model = CurveModel::Dddm;
    o.poly_order = 1;
    o.fourier_order = 1;
    o.dilation = kTwoPi;
    o.solver = CurveSolver::Adam;
    o.learn_dilation = false;
    o.adam_steps = 6000;
    o.adam_lr = 5e-3;
    const CurveFitResult adam = fit_curve(t, y, o);
    EXPECT_LE(adam.rmse, 1e-3);
    EXPECT_EQ(adam.lambda_s, kTwoPi);
}

TEST(CurveFit, Errors) {
    const std::vector<double> t{0.0, 0.5, 1.5}, y{1, 2, 3};
    EXPECT_THROW(fit_curve(t, y, {}), Error);
    EXPECT_THROW(fit_curve(std::vector<double>{0.0}, std::vector<double>{}, {}), Error);
    EXPECT_THROW(fit_curve(std::vector<double>{}, std::vector<double>{}, {}), Error);
    EXPECT_THROW(parse_curve_model("spline"), Error);
    EXPECT_THROW(parse_curve_solver("sgd"), Error);
    EXPECT_EQ(parse_curve_model("fourier"), CurveModel::Fourier);
    CurveFitOptions bad;
    bad.poly_order = -1;
    EXPECT_THROW(curve_for_model(bad), Error);
}

TEST(PlotSeries, DrawsSamplesAndFits) {
    const auto t = grid(30);
    std::vector<double> y, f;
    for (double v : t) {
        y.push_back(std::sin(kTwoPi * v));
        f.push_back(0.9 * std::sin(kTwoPi * v));
    }
    const std::vector<std::vector<double>> fits{f};
    const Image img = plot_series(t, y, fits, 200, 120);
    ASSERT_EQ(img.width, 200);
    ASSERT_EQ(img.height, 120);
    int red = 0;
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        if (img.data[3 * p] > 0.8 && img.data[3 * p + 1] < 0.2) ++red;
    }
    EXPECT_GT(red, 100);
    EXPECT_THROW(plot_series(t, std::vector<double>{1.0}, {}), Error);
}
