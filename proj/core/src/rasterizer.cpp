// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/rasterizer.hpp"

#include "splatflow/dddm.hpp"
#include "splatflow/parallel.hpp"
#include "splatflow/sh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace splatflow {

namespace {

constexpr double kSingularDet = 1e-12;

struct PointState {
    DeformedAttributes def;
    Quat raw_q;
    Mat3 cov;
    SplatGeometry geom;
    Vec3 view_vec;
    Vec3 color_raw;
    double opacity = 0.0;
};

/// Deformation, covariance, projection and SH color for one point.
PointState prepare_point(const DynamicGaussian& p, const TimeBasis& basis, const Camera& cam, const Vec3& cam_center,
                         int sh_degree, const RenderSettings& settings) {
    PointState s;
    s.def = deform_point(p, basis, &s.raw_q);
    s.cov = build_covariance(p.log_scale, s.def.q_t);
    s.geom = project_point(s.def.mu_t, s.cov, cam, settings);
    if (!s.geom.visible()) return s;

    s.view_vec = s.def.mu_t - cam_center;
    const Vec3 dir = s.view_vec.normalized();
    const auto y = sh_basis(sh_degree, dir);
    s.color_raw = Vec3::Constant(0.5) + y[0] * s.def.dc_t;
    const int count = sh_basis_count(sh_degree);
    for (int k = 1; k < count; ++k) {
        for (int c = 0; c < 3; ++c) s.color_raw[c] += y[k] * p.sh_coeffs[std::size_t(k) * 3 + c];
    }
    s.opacity = sigmoid(p.opacity_logit);
    return s;
}

void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error("unnormalized timestamp");
}

struct SplatGrad {
    Vec2 d_mean = Vec2::Zero();
    Vec3 d_conic = Vec3::Zero();
    Vec3 d_color = Vec3::Zero();
    double d_opacity = 0.0;

    SplatGrad& operator+=(const SplatGrad& o) {
        d_mean += o.d_mean;
        d_conic += o.d_conic;
        d_color += o.d_color;
        d_opacity += o.d_opacity;
        return *this;
    }
};

/// Returns -1/2 d^T conic d, or nullopt when the pixel lies outside the splat's support.
inline std::optional<double> splat_power(const ProjectedSplat& s, double px, double py, double& dx, double& dy) {
    dx = px - s.mean2d.x();
    dy = py - s.mean2d.y();
    const double maha = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
    if (!(maha <= s.support_chi2)) return std::nullopt;
    return -0.5 * maha;
}

} // namespace

Mat3 quat_to_rotation(const Quat& q) {
    const Quat n = q.normalized();
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 build_covariance(const Vec3& log_scale, const Quat& q) {
    if (!log_scale.allFinite() || !q.allFinite()) throw Error("non-finite covariance parameters");
    if (!(q.norm() > 0.0)) throw Error("degenerate rotation");
    const Mat3 m = quat_to_rotation(q) * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

void build_covariance_backward(const Vec3& log_scale, const Quat& q, const Mat3& d_sigma, Vec3& d_log_scale,
                               Quat& d_q) {
    const Vec3 scale = log_scale.array().exp();
    const Mat3 r = quat_to_rotation(q);
    const Mat3 m = r * scale.asDiagonal();
    // Sigma = M M^T with symmetric upstream  =>  dM = 2 dSigma M.
    const Mat3 d_m = 2.0 * d_sigma * m;

    const Mat3 d_s = r.transpose() * d_m;
    for (int i = 0; i < 3; ++i) d_log_scale[i] += d_s(i, i) * scale[i];

    const Mat3 g = d_m * scale.asDiagonal();
    const double norm = q.norm();
    const Quat n = q / norm;
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Quat d_n;
    d_n[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d_n[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                    w * g(2, 1) - 2.0 * x * g(2, 2));
    d_n[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                    z * g(2, 1) - 2.0 * y * g(2, 2));
    d_n[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) + y * g(1, 2) +
                    x * g(2, 0) + y * g(2, 1));
    d_q += (d_n - n * n.dot(d_n)) / norm;
}

SplatGeometry project_point(const Vec3& mu, const Mat3& sigma, const Camera& cam, const RenderSettings& settings) {
    SplatGeometry g;
    const Mat3 rot = cam.rotation();
    g.cam_pos = rot * mu + cam.translation();
    const double x = g.cam_pos.x(), y = g.cam_pos.y(), z = g.cam_pos.z();
    g.depth = z;
    if (!(z > cam.znear && z < cam.zfar)) {
        g.status = ProjectionStatus::CulledDepth;
        return g;
    }

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0.0, -cam.fx * x / (z * z), 0.0, cam.fy / z, -cam.fy * y / (z * z);
    const Eigen::Matrix<double, 2, 3> tm = jac * rot;
    g.cov2d = tm * sigma * tm.transpose();
    g.mean2d = Vec2(cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy);

    const double a = g.cov2d(0, 0) + settings.cov_dilation;
    const double b = g.cov2d(0, 1);
    const double c = g.cov2d(1, 1) + settings.cov_dilation;
    const double det = a * c - b * b;
    if (!(det > kSingularDet)) {
        g.status = ProjectionStatus::CulledSingular;
        return g;
    }
    g.conic = Vec3(c / det, -b / det, a / det);
    const double k = std::sqrt(settings.support_chi2);
    g.extent = Vec2(k * std::sqrt(a), k * std::sqrt(c));

    const double guard = kTileSize;
    if (g.mean2d.x() + g.extent.x() < -guard || g.mean2d.x() - g.extent.x() > cam.width + guard ||
        g.mean2d.y() + g.extent.y() < -guard || g.mean2d.y() - g.extent.y() > cam.height + guard) {
        g.status = ProjectionStatus::CulledFrustum;
        return g;
    }
    g.status = ProjectionStatus::Visible;
    return g;
}

void project_point_backward(const Vec3& mu, const Mat3& sigma, const Camera& cam, const SplatGeometry& geom,
                            const Vec2& d_mean2d, const Vec3& d_conic, Vec3& d_mu, Mat3& d_sigma) {
    (void)mu;
    const Mat3 rot = cam.rotation();
    const double x = geom.cam_pos.x(), y = geom.cam_pos.y(), z = geom.cam_pos.z();
    const double fx = cam.fx, fy = cam.fy;

    Mat2 conic;
    conic << geom.conic[0], geom.conic[1], geom.conic[1], geom.conic[2];
    Mat2 g_conic;
    g_conic << d_conic[0], 0.5 * d_conic[1], 0.5 * d_conic[1], d_conic[2];
    // conic = (cov2d + dilation)^-1  =>  d cov2d = -conic G conic.
    const Mat2 g_cov = -conic * g_conic * conic;

    Eigen::Matrix<double, 2, 3> jac;
    jac << fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z);
    const Eigen::Matrix<double, 2, 3> tm = jac * rot;

    d_sigma += tm.transpose() * g_cov * tm;
    const Eigen::Matrix<double, 2, 3> d_tm = 2.0 * g_cov * tm * sigma;
    const Eigen::Matrix<double, 2, 3> d_jac = d_tm * rot.transpose();

    Vec3 d_cam = Vec3::Zero();
    const double z2 = z * z, z3 = z2 * z;
    d_cam.x() += d_jac(0, 2) * (-fx / z2);
    d_cam.y() += d_jac(1, 2) * (-fy / z2);
    d_cam.z() += d_jac(0, 0) * (-fx / z2) + d_jac(0, 2) * (2.0 * fx * x / z3) + d_jac(1, 1) * (-fy / z2) +
                 d_jac(1, 2) * (2.0 * fy * y / z3);

    d_cam.x() += d_mean2d.x() * fx / z;
    d_cam.y() += d_mean2d.y() * fy / z;
    d_cam.z() += -d_mean2d.x() * fx * x / z2 - d_mean2d.y() * fy * y / z2;

    d_mu += rot.transpose() * d_cam;
}

std::array<int, 4> splat_tile_rect(const ProjectedSplat& s, int tiles_x, int tiles_y) {
    // Pixel i lies in the support only if |i + 0.5 - mean| <= extent.
    const double lo_x = s.mean2d.x() - s.extent.x() - 0.5;
    const double hi_x = s.mean2d.x() + s.extent.x() - 0.5;
    const double lo_y = s.mean2d.y() - s.extent.y() - 0.5;
    const double hi_y = s.mean2d.y() + s.extent.y() - 0.5;
    auto tile_of = [](double v) { return int(std::floor(v / kTileSize)); };
    return {std::max(0, tile_of(lo_x)), std::max(0, tile_of(lo_y)), std::min(tiles_x - 1, tile_of(hi_x)),
            std::min(tiles_y - 1, tile_of(hi_y))};
}

SplatList bin_and_sort(std::vector<ProjectedSplat> splats, int width, int height) {
    SplatList list;
    list.tiles_x = (width + kTileSize - 1) / kTileSize;
    list.tiles_y = (height + kTileSize - 1) / kTileSize;
    list.splats = std::move(splats);

    struct Key {
        std::uint32_t tile;
        double depth;
        std::uint32_t splat;
    };
    std::vector<Key> keys;
    for (std::uint32_t i = 0; i < list.splats.size(); ++i) {
        const auto rect = splat_tile_rect(list.splats[i], list.tiles_x, list.tiles_y);
        for (int ty = rect[1]; ty <= rect[3]; ++ty) {
            for (int tx = rect[0]; tx <= rect[2]; ++tx) {
                keys.push_back({std::uint32_t(ty * list.tiles_x + tx), list.splats[i].depth, i});
            }
        }
    }
    std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        return a.tile != b.tile ? a.tile < b.tile : a.depth < b.depth;
    });

    const std::size_t tile_count = std::size_t(list.tiles_x) * list.tiles_y;
    list.tile_ranges.assign(tile_count, {0u, 0u});
    list.entries.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) list.entries[i] = keys[i].splat;
    std::size_t cursor = 0;
    for (std::size_t tile = 0; tile < tile_count; ++tile) {
        const std::size_t begin = cursor;
        while (cursor < keys.size() && keys[cursor].tile == tile) ++cursor;
        list.tile_ranges[tile] = {std::uint32_t(begin), std::uint32_t(cursor)};
    }
    return list;
}

std::vector<ProjectedSplat> project_scene(const Scene& scene, double t, const Camera& cam,
                                          const RenderSettings& settings, ProjectionStats* stats) {
    check_time(t);
    cam.validate();
    const std::size_t n = scene.points.size();
    const Vec3 center = cam.center();
    std::vector<std::optional<ProjectedSplat>> slots(n);
    std::vector<ProjectionStatus> status(n, ProjectionStatus::CulledDepth);

    parallel_chunks(n, resolve_threads(settings.threads), [&](std::size_t begin, std::size_t end, int) {
        TimeBasis basis(scene.poly_order, scene.fourier_order);
        for (std::size_t i = begin; i < end; ++i) {
            const auto& p = scene.points[i];
            basis.update(p.dilation_scale, p.dilation_base, t);
            const PointState s = prepare_point(p, basis, cam, center, scene.sh_degree, settings);
            status[i] = s.geom.status;
            if (!s.geom.visible()) continue;
            ProjectedSplat splat;
            splat.mean2d = s.geom.mean2d;
            splat.conic = s.geom.conic;
            splat.depth = s.geom.depth;
            splat.color = s.color_raw.cwiseMax(0.0);
            splat.opacity = s.opacity;
            splat.extent = s.geom.extent;
            splat.support_chi2 = settings.support_chi2;
            splat.point_index = std::uint32_t(i);
            slots[i] = splat;
        }
    });

    std::vector<ProjectedSplat> out;
    ProjectionStats local;
    for (std::size_t i = 0; i < n; ++i) {
        switch (status[i]) {
        case ProjectionStatus::Visible: ++local.visible; break;
        case ProjectionStatus::CulledDepth: ++local.culled_depth; break;
        case ProjectionStatus::CulledFrustum: ++local.culled_frustum; break;
        case ProjectionStatus::CulledSingular: ++local.culled_singular; break;
        }
        if (slots[i]) out.push_back(*slots[i]);
    }
    if (stats) *stats = local;
    return out;
}

RenderResult rasterize_forward(const Scene& scene, double t, const Camera& cam, const Vec3& background,
                               const RenderSettings& settings) {
    RenderResult result;
    RenderAux& aux = result.aux;
    auto splats = project_scene(scene, t, cam, settings, &aux.stats);
    aux.width = cam.width;
    aux.height = cam.height;
    aux.point_count = scene.points.size();
    aux.list = bin_and_sort(std::move(splats), cam.width, cam.height);
    aux.final_transmittance.assign(std::size_t(cam.width) * cam.height, 1.0);
    aux.last_contributor.assign(std::size_t(cam.width) * cam.height, 0u);
    result.image = Image(cam.width, cam.height);

    const SplatList& list = aux.list;
    const double clamp = settings.alpha_clamp;
    const double threshold = settings.transmittance_threshold;
    const std::size_t tile_count = list.tile_ranges.size();

    parallel_chunks(tile_count, resolve_threads(settings.threads), [&](std::size_t tb, std::size_t te, int) {
        for (std::size_t tile = tb; tile < te; ++tile) {
            const int tx = int(tile % list.tiles_x), ty = int(tile / list.tiles_x);
            const auto [begin, end] = list.tile_ranges[tile];
            const int x1 = std::min(cam.width, (tx + 1) * kTileSize);
            const int y1 = std::min(cam.height, (ty + 1) * kTileSize);
            for (int py = ty * kTileSize; py < y1; ++py) {
                for (int px = tx * kTileSize; px < x1; ++px) {
                    double trans = 1.0;
                    Vec3 color = Vec3::Zero();
                    std::uint32_t last = begin;
                    for (std::uint32_t k = begin; k < end; ++k) {
                        const ProjectedSplat& s = list.splats[list.entries[k]];
                        double dx, dy;
                        const auto power = splat_power(s, px + 0.5, py + 0.5, dx, dy);
                        if (!power) continue;
                        const double alpha = std::min(clamp, s.opacity * std::exp(*power));
                        const double next = trans * (1.0 - alpha);
                        if (next < threshold) break;
                        color += s.color * (alpha * trans);
                        trans = next;
                        last = k + 1;
                    }
                    const std::size_t pix = std::size_t(py) * cam.width + px;
                    aux.final_transmittance[pix] = trans;
                    aux.last_contributor[pix] = last;
                    for (int c = 0; c < 3; ++c) result.image.at(px, py, c) = color[c] + trans * background[c];
                }
            }
        }
    });
    return result;
}

void rasterize_backward(const Scene& scene, double t, const Camera& cam, const Vec3& background,
                        const RenderAux& aux, const Image& d_image, SceneGradient& grads,
                        const RenderSettings& settings, BackwardStats* stats) {
    check_time(t);
    if (aux.point_count != scene.points.size()) throw Error("render aux does not match scene point count");
    if (grads.size() != scene.points.size()) throw Error("gradient buffer does not match scene point count");
    if (d_image.width != aux.width || d_image.height != aux.height || aux.width != cam.width ||
        aux.height != cam.height) {
        throw Error("image gradient does not match render dimensions");
    }

    const SplatList& list = aux.list;
    const std::size_t splat_count = list.splats.size();
    const std::size_t tile_count = list.tile_ranges.size();
    const double clamp = settings.alpha_clamp;
    const int workers = std::max(1, std::min<int>(resolve_threads(settings.threads), int(std::max<std::size_t>(tile_count, 1))));

    std::vector<std::vector<SplatGrad>> partial(std::size_t(workers), std::vector<SplatGrad>(splat_count, SplatGrad{}));
    parallel_chunks(tile_count, workers, [&](std::size_t tb, std::size_t te, int worker) {
        auto& acc = partial[std::size_t(worker)];
        for (std::size_t tile = tb; tile < te; ++tile) {
            const int tx = int(tile % list.tiles_x), ty = int(tile / list.tiles_x);
            const std::uint32_t begin = list.tile_ranges[tile].first;
            const int x1 = std::min(cam.width, (tx + 1) * kTileSize);
            const int y1 = std::min(cam.height, (ty + 1) * kTileSize);
            for (int py = ty * kTileSize; py < y1; ++py) {
                for (int px = tx * kTileSize; px < x1; ++px) {
                    const std::size_t pix = std::size_t(py) * cam.width + px;
                    const Vec3 d_pix(d_image.at(px, py, 0), d_image.at(px, py, 1), d_image.at(px, py, 2));
                    if (d_pix.isZero(0.0)) continue;
                    double trans = aux.final_transmittance[pix];
                    // Color arriving from everything behind the current splat, already attenuated.
                    Vec3 behind = trans * background;
                    for (std::uint32_t k = aux.last_contributor[pix]; k-- > begin;) {
                        const std::uint32_t si = list.entries[k];
                        const ProjectedSplat& s = list.splats[si];
                        double dx, dy;
                        const auto power = splat_power(s, px + 0.5, py + 0.5, dx, dy);
                        if (!power) continue;
                        const double gauss = std::exp(*power);
                        const double raw_alpha = s.opacity * gauss;
                        const double alpha = std::min(clamp, raw_alpha);
                        trans /= (1.0 - alpha);

                        SplatGrad& g = acc[si];
                        g.d_color += (alpha * trans) * d_pix;
                        const double d_alpha = d_pix.dot(trans * s.color - behind / (1.0 - alpha));
                        behind += s.color * (alpha * trans);
                        if (raw_alpha > clamp) continue;

                        g.d_opacity += gauss * d_alpha;
                        const double d_power = alpha * d_alpha;
                        g.d_mean += d_power * Vec2(s.conic[0] * dx + s.conic[1] * dy, s.conic[1] * dx + s.conic[2] * dy);
                        g.d_conic += d_power * Vec3(-0.5 * dx * dx, -dx * dy, -0.5 * dy * dy);
                    }
                }
            }
        }
    });

    std::vector<SplatGrad> splat_grads(splat_count);
    for (const auto& part : partial) {
        for (std::size_t i = 0; i < splat_count; ++i) splat_grads[i] += part[i];
    }
    partial.clear();

    if (stats) {
        stats->mean2d_grad_norm.assign(scene.points.size(), 0.0);
        stats->visible.assign(scene.points.size(), 0);
    }

    const Vec3 center = cam.center();
    parallel_chunks(splat_count, resolve_threads(settings.threads), [&](std::size_t begin, std::size_t end, int) {
        TimeBasis basis(scene.poly_order, scene.fourier_order);
        for (std::size_t i = begin; i < end; ++i) {
            const SplatGrad& sg = splat_grads[i];
            const std::uint32_t pi = list.splats[i].point_index;
            const DynamicGaussian& p = scene.points[pi];
            GaussianGrad& out = grads[pi];
            basis.update(p.dilation_scale, p.dilation_base, t);
            const PointState s = prepare_point(p, basis, cam, center, scene.sh_degree, settings);

            if (stats) {
                stats->visible[pi] = 1;
                stats->mean2d_grad_norm[pi] =
                    Vec2(sg.d_mean.x() * 0.5 * cam.width, sg.d_mean.y() * 0.5 * cam.height).norm();
            }

            out.opacity_logit += sg.d_opacity * s.opacity * (1.0 - s.opacity);

            // Color: clamp at zero, then SH with the deformed DC term.
            Vec3 d_raw = sg.d_color;
            for (int c = 0; c < 3; ++c) {
                if (s.color_raw[c] < 0.0) d_raw[c] = 0.0;
            }
            const double view_norm = s.view_vec.norm();
            const Vec3 dir = s.view_vec / view_norm;
            const auto y = sh_basis(scene.sh_degree, dir);
            const auto jy = sh_basis_jacobian(scene.sh_degree, dir);
            const Vec3 d_dc = y[0] * d_raw;
            Vec3 d_dir = Vec3::Zero();
            const int count = sh_basis_count(scene.sh_degree);
            for (int k = 1; k < count; ++k) {
                double dot = 0.0;
                for (int c = 0; c < 3; ++c) {
                    out.sh_coeffs[std::size_t(k) * 3 + c] += y[k] * d_raw[c];
                    dot += p.sh_coeffs[std::size_t(k) * 3 + c] * d_raw[c];
                }
                d_dir += dot * jy[k];
            }
            Vec3 d_mu = (d_dir - dir * dir.dot(d_dir)) / view_norm;

            Mat3 d_sigma = Mat3::Zero();
            project_point_backward(s.def.mu_t, s.cov, cam, s.geom, sg.d_mean, sg.d_conic, d_mu, d_sigma);
            d_sigma = 0.5 * (d_sigma + d_sigma.transpose()).eval();
            Quat d_q = Quat::Zero();
            build_covariance_backward(p.log_scale, s.def.q_t, d_sigma, out.log_scale, d_q);

            deform_backward(p, basis, s.raw_q, d_mu, d_q, d_dc, out);
        }
    });
}

Image render_reference(const Scene& scene, double t, const Camera& cam, const Vec3& background,
                       const RenderSettings& settings) {
    const auto splats = project_scene(scene, t, cam, settings);
    std::vector<std::size_t> order(splats.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return splats[a].depth < splats[b].depth; });

    Image image(cam.width, cam.height);
    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            double trans = 1.0;
            Vec3 color = Vec3::Zero();
            for (const std::size_t i : order) {
                const ProjectedSplat& s = splats[i];
                double dx, dy;
                const auto power = splat_power(s, px + 0.5, py + 0.5, dx, dy);
                if (!power) continue;
                const double alpha = std::min(settings.alpha_clamp, s.opacity * std::exp(*power));
                color += s.color * (alpha * trans);
                trans *= (1.0 - alpha);
            }
            for (int c = 0; c < 3; ++c) image.at(px, py, c) = color[c] + trans * background[c];
        }
    }
    return image;
}

} // namespace splatflow
