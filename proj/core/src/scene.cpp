// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/scene.hpp"

#include "splatflow/regularize.hpp"
#include "splatflow/sh.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace splatflow {

namespace {

constexpr double kMinSeedDistance = 3.1622776601683794e-4; // sqrt(1e-7)
constexpr double kIsolatedSeedScale = 0.01;
constexpr std::array<char, 16> kMagic{'S', 'P', 'L', 'A', 'T', 'F', 'L', 'O', 'W', '4', 'D', 0, 0, 0, 0, 0};
constexpr std::size_t kHeaderSize = 16 + 2 + 8 + 4 * 4;

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        std::array<std::uint8_t, sizeof(T)> raw;
        std::memcpy(raw.data(), &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        bytes.insert(bytes.end(), raw.begin(), raw.end());
    }
    void put_f32(double v) { put(static_cast<float>(v)); }
    void put_f32(std::span<const double> vs) {
        for (double v : vs) put_f32(v);
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw Error("checkpoint truncated at byte offset " + std::to_string(pos_));
        }
        std::array<std::uint8_t, sizeof(T)> raw;
        std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, raw.data(), sizeof(T));
        return v;
    }
    double get_f32() { return double(get<float>()); }
    void get_f32(std::span<double> out) {
        for (double& v : out) v = get_f32();
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw Error("checkpoint truncated at byte offset " + std::to_string(pos_));
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

Vec3 rgb_to_sh_dc(const Vec3& rgb) { return (rgb - Vec3::Constant(0.5)) / kShC0; }

Scene new_scene_from_points(std::span<const SeedPoint> seeds, const TrainConfig& config, int frame_count) {
    if (seeds.empty()) throw Error("empty point set");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!seeds[i].position.allFinite()) throw Error("non-finite coordinate at point " + std::to_string(i));
    }
    if (frame_count < 1) throw Error("frame_count must be >= 1");

    Scene scene;
    scene.frame_count = frame_count;
    scene.sh_degree = config.sh_degree;
    scene.poly_order = config.poly_order;
    scene.fourier_order = config.fourier_order;

    std::vector<Vec3> positions;
    positions.reserve(seeds.size());
    for (const auto& s : seeds) positions.push_back(s.position);
    const int k = int(std::min<std::size_t>(3, seeds.size() - 1));
    KnnIndex knn;
    if (k > 0) knn = build_knn(positions, k);

    scene.points.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        DynamicGaussian p(config.poly_order, config.fourier_order, config.sh_degree);
        p.mu0 = seeds[i].position;
        double scale = kIsolatedSeedScale;
        if (k > 0) {
            double sum = 0.0;
            for (const auto j : knn.of(i)) sum += (positions[j] - positions[i]).norm();
            scale = std::max(sum / k, kMinSeedDistance);
        }
        p.log_scale = Vec3::Constant(std::log(scale));
        p.opacity_logit = logit(config.init_opacity);
        const Vec3 dc = rgb_to_sh_dc(seeds[i].color);
        for (int c = 0; c < 3; ++c) p.sh_coeffs[c] = dc[c];
        scene.points.push_back(std::move(p));
    }
    return scene;
}

std::vector<std::uint8_t> serialize_checkpoint(const Scene& scene, const TrainConfig& config) {
    scene.validate();
    Writer w;
    w.bytes.insert(w.bytes.end(), kMagic.begin(), kMagic.end());
    w.put(kCheckpointVersion);
    w.put(std::uint64_t(scene.points.size()));
    w.put(std::uint32_t(scene.poly_order));
    w.put(std::uint32_t(scene.fourier_order));
    w.put(std::uint32_t(scene.sh_degree));
    w.put(std::uint32_t(scene.frame_count));

    const auto& pts = scene.points;
    for (const auto& p : pts) w.put_f32(std::span<const double>(p.mu0.data(), 3));
    for (const auto& p : pts) w.put_f32(std::span<const double>(p.q0.data(), 4));
    for (const auto& p : pts) w.put_f32(std::span<const double>(p.log_scale.data(), 3));
    for (const auto& p : pts) w.put_f32(p.opacity_logit);
    for (const auto& p : pts) w.put_f32(p.sh_coeffs);
    for (const auto& p : pts) {
        for (const auto& c : p.curves_mu) w.put_f32(c.coeffs());
    }
    for (const auto& p : pts) {
        for (const auto& c : p.curves_q) w.put_f32(c.coeffs());
    }
    for (const auto& p : pts) {
        for (const auto& c : p.curves_c) w.put_f32(c.coeffs());
    }
    for (const auto& p : pts) w.put_f32(p.dilation_scale);
    for (const auto& p : pts) w.put_f32(p.dilation_base);

    const std::string trailer = to_json(config);
    w.put(std::uint64_t(trailer.size()));
    w.bytes.insert(w.bytes.end(), trailer.begin(), trailer.end());
    return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize) throw Error("checkpoint truncated: header is " + std::to_string(kHeaderSize) + " bytes");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error("not a splatflow checkpoint (bad magic)");
    Reader r(bytes.subspan(kMagic.size()));
    const auto version = r.get<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw Error("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = r.get<std::uint64_t>();
    Checkpoint out;
    Scene& scene = out.scene;
    scene.poly_order = int(r.get<std::uint32_t>());
    scene.fourier_order = int(r.get<std::uint32_t>());
    scene.sh_degree = int(r.get<std::uint32_t>());
    scene.frame_count = int(r.get<std::uint32_t>());
    if (scene.sh_degree > 3 || scene.poly_order > 64 || scene.fourier_order > 4096) {
        throw Error("checkpoint header has implausible model orders");
    }
    const std::size_t curve_size = std::size_t(scene.poly_order + 1 + 2 * scene.fourier_order);
    const std::size_t per_point = 3 + 4 + 3 + 1 + std::size_t(sh_basis_count(scene.sh_degree)) * 3 +
                                  std::size_t(kCurveChannels) * curve_size + 2;
    if (count > r.remaining() / (per_point * 4)) throw Error("checkpoint truncated: point arrays incomplete");

    scene.points.assign(count, DynamicGaussian(scene.poly_order, scene.fourier_order, scene.sh_degree));
    auto& pts = scene.points;
    for (auto& p : pts) r.get_f32(std::span<double>(p.mu0.data(), 3));
    for (auto& p : pts) r.get_f32(std::span<double>(p.q0.data(), 4));
    for (auto& p : pts) r.get_f32(std::span<double>(p.log_scale.data(), 3));
    for (auto& p : pts) p.opacity_logit = r.get_f32();
    for (auto& p : pts) r.get_f32(p.sh_coeffs);
    for (auto& p : pts) {
        for (auto& c : p.curves_mu) r.get_f32(c.coeffs());
    }
    for (auto& p : pts) {
        for (auto& c : p.curves_q) r.get_f32(c.coeffs());
    }
    for (auto& p : pts) {
        for (auto& c : p.curves_c) r.get_f32(c.coeffs());
    }
    for (auto& p : pts) p.dilation_scale = r.get_f32();
    for (auto& p : pts) p.dilation_base = r.get_f32();

    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) throw Error("checkpoint truncated: config trailer incomplete");
    const auto json = r.take(std::size_t(len));
    out.config = config_from_json(std::string_view(reinterpret_cast<const char*>(json.data()), json.size()));
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Scene& scene, const TrainConfig& config) {
    const auto bytes = serialize_checkpoint(scene, config);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open checkpoint for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw Error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint: " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

} // namespace splatflow
