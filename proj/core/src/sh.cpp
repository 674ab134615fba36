// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/sh.hpp"

namespace splatflow {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree) throw Error("unsupported SH degree");
}

} // namespace

std::array<double, 16> sh_basis(int degree, const Vec3& dir) {
    check_degree(degree);
    std::array<double, 16> y{};
    const double x = dir.x(), yy = dir.y(), z = dir.z();
    y[0] = kShC0;
    if (degree < 1) return y;
    y[1] = -kC1 * yy;
    y[2] = kC1 * z;
    y[3] = -kC1 * x;
    if (degree < 2) return y;
    const double xx = x * x, y2 = yy * yy, zz = z * z;
    y[4] = kC2[0] * x * yy;
    y[5] = kC2[1] * yy * z;
    y[6] = kC2[2] * (2.0 * zz - xx - y2);
    y[7] = kC2[3] * x * z;
    y[8] = kC2[4] * (xx - y2);
    if (degree < 3) return y;
    y[9] = kC3[0] * yy * (3.0 * xx - y2);
    y[10] = kC3[1] * x * yy * z;
    y[11] = kC3[2] * yy * (4.0 * zz - xx - y2);
    y[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * y2);
    y[13] = kC3[4] * x * (4.0 * zz - xx - y2);
    y[14] = kC3[5] * z * (xx - y2);
    y[15] = kC3[6] * x * (xx - 3.0 * y2);
    return y;
}

std::array<Vec3, 16> sh_basis_jacobian(int degree, const Vec3& dir) {
    check_degree(degree);
    std::array<Vec3, 16> j;
    j.fill(Vec3::Zero());
    if (degree < 1) return j;
    const double x = dir.x(), y = dir.y(), z = dir.z();
    j[1] = {0.0, -kC1, 0.0};
    j[2] = {0.0, 0.0, kC1};
    j[3] = {-kC1, 0.0, 0.0};
    if (degree < 2) return j;
    const double xx = x * x, yy = y * y, zz = z * z;
    j[4] = kC2[0] * Vec3(y, x, 0.0);
    j[5] = kC2[1] * Vec3(0.0, z, y);
    j[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
    j[7] = kC2[3] * Vec3(z, 0.0, x);
    j[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
    if (degree < 3) return j;
    j[9] = kC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    j[10] = kC3[1] * Vec3(y * z, x * z, x * y);
    j[11] = kC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    j[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    j[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    j[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
    j[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
    return j;
}

Vec3 eval_sh_raw(int degree, std::span<const double> coeffs, const Vec3& dir) {
    const int count = sh_basis_count(degree);
    if (coeffs.size() < std::size_t(count) * 3) throw Error("SH coefficient buffer too small");
    const auto y = sh_basis(degree, dir);
    Vec3 color = Vec3::Constant(0.5);
    for (int k = 0; k < count; ++k) {
        for (int c = 0; c < 3; ++c) color[c] += y[k] * coeffs[std::size_t(k) * 3 + c];
    }
    return color;
}

Vec3 eval_sh(int degree, std::span<const double> coeffs, const Vec3& dir) {
    return eval_sh_raw(degree, coeffs, dir).cwiseMax(0.0);
}

} // namespace splatflow
