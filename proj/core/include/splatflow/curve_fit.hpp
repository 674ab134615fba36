// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Fitting one deformation channel to a sampled 1-D trajectory, used to
// compare polynomial, Fourier and combined residual models.
//
#pragma once

#include "splatflow/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace splatflow {

enum class CurveModel { Poly, Fourier, Dddm };
enum class CurveSolver { Lstsq, Adam };

CurveModel parse_curve_model(std::string_view name);
CurveSolver parse_curve_solver(std::string_view name);

struct CurveFitOptions {
    CurveModel model = CurveModel::Dddm;
    /// Polynomial order N (poly and dddm).
    int poly_order = 3;
    /// Number of harmonics L (fourier and dddm). The fourier model also has a constant term.
    int fourier_order = 16;
    /// Initial (and, for the least-squares solver, fixed) lambda_s; lambda_b starts at 0.
    double dilation = 1.0;
    CurveSolver solver = CurveSolver::Lstsq;
    int adam_steps = 4000;
    double adam_lr = 1e-2;
    /// The Adam solver also learns lambda_s and lambda_b.
    bool learn_dilation = true;
};

struct CurveFitResult {
    ChannelCurve curve;
    double lambda_s = 1.0;
    double lambda_b = 0.0;
    std::vector<double> fitted;
    double rmse = 0.0;
};

/// Curve shape for a model: poly -> (N, 0), fourier -> (0, L), dddm -> (N, L).
ChannelCurve curve_for_model(const CurveFitOptions& options);

/// Times must lie in [0, 1].
CurveFitResult fit_curve(std::span<const double> t, std::span<const double> y, const CurveFitOptions& options);

/// Orders giving each model at most the N + 1 + 2L coefficients of a dddm
/// curve with poly_order N and L harmonics: poly uses order N + 2L, fourier
/// (N + 2L) / 2 harmonics.
CurveFitOptions matched_budget(CurveModel model, int poly_order, int fourier_order, double dilation);

/// Line chart of the samples (gray) and each fitted series (colored).
Image plot_series(std::span<const double> t, std::span<const double> samples,
                  std::span<const std::vector<double>> fits, int width = 640, int height = 400);

} // namespace splatflow
