// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include <splatflow/sh.hpp>

#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace splatflow;
using namespace splatflow::testing;

namespace {

int degree_of(int k) { return int(std::sqrt(double(k))); }

} // namespace

TEST(Sh, OrthonormalOnTheSphere) {
    // Fibonacci lattice quadrature of Y_i Y_j over the unit sphere.
    const int samples = 200000;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    Eigen::Matrix<double, 16, 16> gram = Eigen::Matrix<double, 16, 16>::Zero();
    for (int s = 0; s < samples; ++s) {
        const double z = 1.0 - (2.0 * s + 1.0) / samples;
        const double r = std::sqrt(1.0 - z * z);
        const Vec3 d(r * std::cos(golden * s), r * std::sin(golden * s), z);
        const auto y = sh_basis(3, d);
        const Eigen::Map<const Eigen::Matrix<double, 16, 1>> v(y.data());
        gram += v * v.transpose();
    }
    gram *= 4.0 * std::numbers::pi / samples;
    EXPECT_LT((gram - Eigen::Matrix<double, 16, 16>::Identity()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Sh, Parity) {
    const Vec3 d = Vec3(0.3, -0.5, 0.8).normalized();
    const auto a = sh_basis(3, d);
    const auto b = sh_basis(3, -d);
    for (int k = 0; k < 16; ++k) EXPECT_NEAR(b[k], (degree_of(k) % 2 ? -1.0 : 1.0) * a[k], 1e-14);
}

TEST(Sh, LowerDegreesAreZeroPadded) {
    const Vec3 d = Vec3(1, 2, 3).normalized();
    const auto y1 = sh_basis(1, d);
    const auto y3 = sh_basis(3, d);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(y1[k], y3[k]);
    for (int k = 4; k < 16; ++k) EXPECT_EQ(y1[k], 0.0);
    EXPECT_EQ(y3[0], kShC0);
}

TEST(Sh, JacobianMatchesFiniteDifferences) {
    Vec3 d = Vec3(0.2, -0.7, 0.4).normalized();
    const auto jac = sh_basis_jacobian(3, d);
    for (int k = 0; k < 16; ++k) {
        for (int a = 0; a < 3; ++a) {
            const double num = richardson_derivative(d[a], 1e-4, [&] { return sh_basis(3, d)[k]; });
            EXPECT_LT(relative_error(jac[k][a], num, 1e-8), 1e-8) << k << " " << a;
        }
    }
}

TEST(Sh, DcOnlyColorAndClamp) {
    std::vector<double> coeffs(3 * 16, 0.0);
    coeffs[0] = 1.0;
    coeffs[1] = -3.0;
    const Vec3 c = eval_sh(3, coeffs, Vec3(0, 0, 1));
    EXPECT_NEAR(c[0], 0.5 + kShC0, 1e-15);
    EXPECT_EQ(c[1], 0.0);
    EXPECT_NEAR(eval_sh_raw(3, coeffs, Vec3(0, 0, 1))[1], 0.5 - 3.0 * kShC0, 1e-15);
    EXPECT_EQ(c[2], 0.5);
}
