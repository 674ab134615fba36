// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Real spherical harmonics up to degree 3 with the usual splatting
// conventions: color = sum_k Y_k(dir) * coeff_k + 0.5, clamped at zero.
//
#pragma once

#include "splatflow/types.hpp"

#include <array>
#include <span>

namespace splatflow {

inline constexpr int kMaxShDegree = 3;
inline constexpr double kShC0 = 0.28209479177387814;

/// Basis values Y_k(dir) for k < sh_basis_count(degree).
std::array<double, 16> sh_basis(int degree, const Vec3& dir);

/// Jacobian dY_k/d(dir) (dir treated as a free 3-vector, no normalization).
std::array<Vec3, 16> sh_basis_jacobian(int degree, const Vec3& dir);

/// Unclamped color sum_k Y_k coeff_k + 0.5.
Vec3 eval_sh_raw(int degree, std::span<const double> coeffs, const Vec3& dir);

/// View-dependent color, clamped at zero.
Vec3 eval_sh(int degree, std::span<const double> coeffs, const Vec3& dir);

} // namespace splatflow
