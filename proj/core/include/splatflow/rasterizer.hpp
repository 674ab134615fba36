// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
// Tile-based differentiable splatting of deformed Gaussians.
//
// Pixel (x, y) is sampled at its center (x + 0.5, y + 0.5). A splat only
// contributes to pixels inside its 99% confidence ellipse
// (Mahalanobis distance squared <= kConfidenceChi2); the same support is used
// for culling, tile binning, blending and the reference renderer, so the tiled
// and reference paths agree exactly.
//
#pragma once

#include "splatflow/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace splatflow {

inline constexpr int kTileSize = 16;
/// 99% quantile of the chi-square distribution with two degrees of freedom, -2 ln(0.01).
inline constexpr double kConfidenceChi2 = 9.210340371976184;

struct RenderSettings {
    double alpha_clamp = 0.99;
    /// Added to the diagonal of the projected covariance (px^2).
    double cov_dilation = 0.3;
    /// Front-to-back blending stops once transmittance would drop below this.
    double transmittance_threshold = 1e-4;
    /// Mahalanobis distance squared beyond which a splat has no effect.
    double support_chi2 = kConfidenceChi2;
    /// Worker threads; 0 picks std::thread::hardware_concurrency().
    int threads = 0;
};

/// Sigma = R(q) diag(exp(log_scale))^2 R(q)^T, with q normalized internally.
Mat3 build_covariance(const Vec3& log_scale, const Quat& q);

/// Rotation matrix of a (w, x, y, z) quaternion, normalized internally.
Mat3 quat_to_rotation(const Quat& q);

/// Given dL/dSigma (full symmetric matrix convention), accumulate dL/dlog_scale and dL/dq.
void build_covariance_backward(const Vec3& log_scale, const Quat& q, const Mat3& d_sigma, Vec3& d_log_scale,
                               Quat& d_q);

enum class ProjectionStatus { Visible, CulledDepth, CulledFrustum, CulledSingular };

struct SplatGeometry {
    ProjectionStatus status = ProjectionStatus::CulledDepth;
    Vec3 cam_pos = Vec3::Zero();
    Vec2 mean2d = Vec2::Zero();
    /// J W Sigma W^T J^T before the low-pass dilation.
    Mat2 cov2d = Mat2::Zero();
    /// Upper triangle (a, b, c) of the inverse of the dilated covariance.
    Vec3 conic = Vec3::Zero();
    double depth = 0.0;
    /// Half extents of the axis-aligned box around the support ellipse, in pixels.
    Vec2 extent = Vec2::Zero();

    bool visible() const { return status == ProjectionStatus::Visible; }
};

SplatGeometry project_point(const Vec3& mu, const Mat3& sigma, const Camera& cam,
                            const RenderSettings& settings = {});

/// Backpropagate dL/dmean2d and dL/dconic (b is the single off-diagonal
/// scalar, counted twice in the quadratic form) into dL/dmu and dL/dSigma.
void project_point_backward(const Vec3& mu, const Mat3& sigma, const Camera& cam, const SplatGeometry& geom,
                            const Vec2& d_mean2d, const Vec3& d_conic, Vec3& d_mu, Mat3& d_sigma);

struct ProjectedSplat {
    Vec2 mean2d = Vec2::Zero();
    Vec3 conic = Vec3::Zero();
    double depth = 0.0;
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
    Vec2 extent = Vec2::Zero();
    double support_chi2 = kConfidenceChi2;
    std::uint32_t point_index = 0;
};

struct SplatList {
    std::vector<ProjectedSplat> splats;
    /// Indices into `splats`, sorted by (tile, depth).
    std::vector<std::uint32_t> entries;
    /// Per tile [begin, end) into `entries`, row-major over tiles.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> tile_ranges;
    int tiles_x = 0;
    int tiles_y = 0;
};

/// Duplicate each splat into every tile its 99% box overlaps and sort the
/// entries by (tile, depth) with a stable sort.
SplatList bin_and_sort(std::vector<ProjectedSplat> splats, int width, int height);

/// Inclusive tile rectangle (x0, y0, x1, y1) covered by a splat; empty when x0 > x1 or y0 > y1.
std::array<int, 4> splat_tile_rect(const ProjectedSplat& s, int tiles_x, int tiles_y);

struct ProjectionStats {
    std::size_t visible = 0;
    std::size_t culled_depth = 0;
    std::size_t culled_frustum = 0;
    std::size_t culled_singular = 0;
};

struct RenderAux {
    int width = 0;
    int height = 0;
    std::size_t point_count = 0;
    SplatList list;
    std::vector<double> final_transmittance;
    /// One past the last contributing entry, as an absolute index into list.entries.
    std::vector<std::uint32_t> last_contributor;
    ProjectionStats stats;
};

struct RenderResult {
    Image image;
    RenderAux aux;
};

RenderResult rasterize_forward(const Scene& scene, double t, const Camera& cam, const Vec3& background,
                               const RenderSettings& settings = {});

struct BackwardStats {
    /// Norm of dL/dmean2d in normalized device coordinates, per point (0 when culled).
    std::vector<double> mean2d_grad_norm;
    std::vector<std::uint8_t> visible;
};

/// Accumulate dL/dparams into `grads` (which must be shaped like the scene).
void rasterize_backward(const Scene& scene, double t, const Camera& cam, const Vec3& background,
                        const RenderAux& aux, const Image& d_image, SceneGradient& grads,
                        const RenderSettings& settings = {}, BackwardStats* stats = nullptr);

/// Per-pixel reference: global depth sort, no tiles, no early termination.
Image render_reference(const Scene& scene, double t, const Camera& cam, const Vec3& background,
                       const RenderSettings& settings = {});

/// Project every point of the scene at time t (deformation, covariance,
/// projection, SH color). Culled points are omitted.
std::vector<ProjectedSplat> project_scene(const Scene& scene, double t, const Camera& cam,
                                          const RenderSettings& settings, ProjectionStats* stats = nullptr);

} // namespace splatflow
