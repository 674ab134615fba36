// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatflow/types.hpp"

#include <limits>
#include <span>

namespace splatflow {

struct MetricReport {
    /// dB; +infinity for identical images.
    double psnr = std::numeric_limits<double>::infinity();
    double ssim = 1.0;
};

/// Copy of `img` with every value clamped to [0, 1].
Image clamped(const Image& img);

/// 10 log10(1 / MSE) over all pixels and channels.
double psnr(const Image& a, const Image& b);

/// SSIM of the channel-mean grayscale images: 11x11 Gaussian window
/// (sigma 1.5), k1 = 0.01, k2 = 0.03, data range 1, averaged over windows
/// that lie fully inside the image.
double ssim(const Image& a, const Image& b);

MetricReport evaluate_metrics(const Image& a, const Image& b);

enum class SsimRegion {
    /// Only window centers whose window lies inside the image.
    Valid,
    /// Every pixel, with zero padding outside the image.
    Same,
};

/// Mean SSIM of one channel plane. If `d_a` is non-empty it receives dSSIM/da.
double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height, SsimRegion region,
                  std::span<double> d_a = {});

} // namespace splatflow
