// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace splatflow {

namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kRadius + 1>& window() {
    static const auto w = [] {
        std::array<double, 2 * kRadius + 1> v{};
        double sum = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) {
            v[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
            sum += v[i + kRadius];
        }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return w;
}

/// Separable Gaussian filter with zero padding, output same size as input.
std::vector<double> blur(std::span<const double> in, int width, int height) {
    const auto& w = window();
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -kRadius; k <= kRadius; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width) acc += w[k + kRadius] * in[std::size_t(y) * width + xx];
            }
            tmp[std::size_t(y) * width + x] = acc;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -kRadius; k <= kRadius; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height) acc += w[k + kRadius] * tmp[std::size_t(yy) * width + x];
            }
            out[std::size_t(y) * width + x] = acc;
        }
    }
    return out;
}

void check_same_dims(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
        throw Error("metric inputs have different dimensions");
    }
    if (a.data.empty()) throw Error("metric inputs are empty");
}

std::vector<double> grayscale(const Image& img) {
    std::vector<double> g(img.pixel_count());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = (img.data[3 * i] + img.data[3 * i + 1] + img.data[3 * i + 2]) / 3.0;
    }
    return g;
}

} // namespace

Image clamped(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

double psnr(const Image& a, const Image& b) {
    check_same_dims(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    const double mse = sum / double(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    check_same_dims(a, b);
    const auto ga = grayscale(a);
    const auto gb = grayscale(b);
    return ssim_plane(ga, gb, a.width, a.height, SsimRegion::Valid);
}

MetricReport evaluate_metrics(const Image& a, const Image& b) { return {psnr(a, b), ssim(a, b)}; }

double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height, SsimRegion region,
                  std::span<double> d_a) {
    const std::size_t n = std::size_t(width) * height;
    if (a.size() != n || b.size() != n) throw Error("ssim: plane size mismatch");
    int x0 = 0, y0 = 0, x1 = width, y1 = height;
    if (region == SsimRegion::Valid) {
        if (width < 2 * kRadius + 1 || height < 2 * kRadius + 1) throw Error("ssim: image smaller than window");
        x0 = y0 = kRadius;
        x1 = width - kRadius;
        y1 = height - kRadius;
    }
    const double count = double(x1 - x0) * double(y1 - y0);

    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu_a = blur(a, width, height);
    const auto mu_b = blur(b, width, height);
    const auto e_aa = blur(aa, width, height);
    const auto e_bb = blur(bb, width, height);
    const auto e_ab = blur(ab, width, height);

    const bool want_grad = !d_a.empty();
    if (want_grad && d_a.size() != n) throw Error("ssim: gradient buffer size mismatch");
    std::vector<double> ga, gb, gc;
    if (want_grad) {
        ga.assign(n, 0.0);
        gb.assign(n, 0.0);
        gc.assign(n, 0.0);
    }

    double total = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::size_t i = std::size_t(y) * width + x;
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = e_aa[i] - ma * ma;
            const double vb = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            const double n1 = 2.0 * ma * mb + kC1, n2 = 2.0 * cov + kC2;
            const double d1 = ma * ma + mb * mb + kC1, d2 = va + vb + kC2;
            const double s = (n1 * n2) / (d1 * d2);
            total += s;
            if (!want_grad) continue;
            const double ds_dmu = 2.0 * mb * n2 / (d1 * d2) - s * 2.0 * ma / d1;
            const double ds_dvar = -s / d2;
            const double ds_dcov = 2.0 * n1 / (d1 * d2);
            ga[i] = (ds_dmu - 2.0 * ma * ds_dvar - mb * ds_dcov) / count;
            gb[i] = ds_dvar / count;
            gc[i] = ds_dcov / count;
        }
    }

    if (want_grad) {
        // The symmetric zero-padded filter is its own adjoint.
        const auto fa = blur(ga, width, height);
        const auto fb = blur(gb, width, height);
        const auto fc = blur(gc, width, height);
        for (std::size_t i = 0; i < n; ++i) d_a[i] = fa[i] + 2.0 * a[i] * fb[i] + b[i] * fc[i];
    }
    return total / count;
}

} // namespace splatflow
