// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatflow/dataio.hpp"

#include "splatflow/dddm.hpp"
#include "splatflow/parallel.hpp"
#include "splatflow/sh.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>

namespace splatflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw Error("failed writing " + path.string());
}

template <typename T>
void append_le(std::string& out, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.append(raw, sizeof(T));
}

template <typename T>
T load_le(const std::uint8_t* p) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
}

std::uint8_t to_byte(double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

bool parse_ply_type(const std::string& name, PlyType& type) {
    static const std::pair<const char*, PlyType> table[] = {
        {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
        {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
        {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
        {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
        {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
        {"float64", PlyType::Float64},
    };
    for (const auto& [n, t] : table) {
        if (name == n) {
            type = t;
            return true;
        }
    }
    return false;
}

std::size_t ply_size(PlyType t) {
    switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
    }
    return 0;
}

double ply_value(PlyType t, const std::uint8_t* p) {
    switch (t) {
    case PlyType::Int8: return double(std::int8_t(*p));
    case PlyType::UInt8: return double(*p);
    case PlyType::Int16: return double(load_le<std::int16_t>(p));
    case PlyType::UInt16: return double(load_le<std::uint16_t>(p));
    case PlyType::Int32: return double(load_le<std::int32_t>(p));
    case PlyType::UInt32: return double(load_le<std::uint32_t>(p));
    case PlyType::Float32: return double(load_le<float>(p));
    case PlyType::Float64: return load_le<double>(p);
    }
    return 0.0;
}

struct PlyProperty {
    std::string name;
    PlyType type;
    std::size_t offset;
};

Camera camera_from_object(const json& j) {
    Camera cam;
    try {
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto m = j.at("world_to_cam").get<std::vector<double>>();
        if (m.size() != 16) throw Error("camera world_to_cam must have 16 entries");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) cam.world_to_cam(r, c) = m[std::size_t(r * 4 + c)];
        if (j.contains("znear")) cam.znear = j.at("znear").get<double>();
        if (j.contains("zfar")) cam.zfar = j.at("zfar").get<double>();
    } catch (const json::exception& e) {
        throw Error(std::string("invalid camera: ") + e.what());
    }
    cam.validate();
    return cam;
}

json camera_object(const Camera& cam) {
    std::vector<double> m(16);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m[std::size_t(r * 4 + c)] = cam.world_to_cam(r, c);
    return json{{"fx", cam.fx},         {"fy", cam.fy},       {"cx", cam.cx},       {"cy", cam.cy},
                {"width", cam.width},   {"height", cam.height}, {"world_to_cam", m}, {"znear", cam.znear},
                {"zfar", cam.zfar}};
}

std::string ply_header(std::size_t count, bool with_opacity) {
    std::string h = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(count) +
                    "\nproperty float x\nproperty float y\nproperty float z\n"
                    "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (with_opacity) h += "property float opacity\n";
    return h + "end_header\n";
}

} // namespace

Image read_png(const fs::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    const auto bytes = read_file(path);
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw Error("cannot decode PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw Error("cannot decode PNG " + path.string() + ": " + msg);
    }
    Image out(int(img.width), int(img.height));
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0;
    return out;
}

void write_png(const fs::path& path, const Image& image) {
    if (image.width <= 0 || image.height <= 0) throw Error("cannot write an empty image");
    std::vector<std::uint8_t> buffer(image.data.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = to_byte(image.data[i]);
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = png_uint_32(image.width);
    img.height = png_uint_32(image.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        throw Error("cannot write PNG " + path.string() + ": " + img.message);
    }
}

void write_npy(const fs::path& path, const Image& image) {
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(image.height) +
                         ", " + std::to_string(image.width) + ", 3), }";
    // Magic (6) + version (2) + header length (2) + header, padded to 64 bytes, newline-terminated.
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');
    std::string out("\x93NUMPY\x01\x00", 8);
    append_le(out, std::uint16_t(header.size()));
    out += header;
    for (double v : image.data) append_le(out, float(v));
    write_file(path, out);
}

std::vector<SeedPoint> read_ply(const fs::path& path) {
    const auto bytes = read_file(path);
    std::size_t pos = 0;
    auto next_line = [&](std::size_t& line_start) {
        line_start = pos;
        const auto it = std::find(bytes.begin() + std::ptrdiff_t(pos), bytes.end(), std::uint8_t('\n'));
        if (it == bytes.end()) throw Error("malformed PLY " + path.string() + ": unterminated header at byte offset " + std::to_string(pos));
        std::string line(bytes.begin() + std::ptrdiff_t(pos), it);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = std::size_t(it - bytes.begin()) + 1;
        return line;
    };
    auto fail = [&](std::size_t offset, const std::string& what) {
        return Error("malformed PLY " + path.string() + ": " + what + " at byte offset " + std::to_string(offset));
    };

    std::size_t line_start = 0;
    if (next_line(line_start) != "ply") throw fail(0, "missing 'ply' magic");
    std::size_t vertex_count = 0;
    bool in_vertex = false, seen_vertex = false, have_format = false;
    std::vector<PlyProperty> props;
    std::size_t stride = 0;
    while (true) {
        const std::string line = next_line(line_start);
        std::istringstream in(line);
        std::string kw;
        in >> kw;
        if (kw == "end_header") break;
        if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            std::string fmt, ver;
            in >> fmt >> ver;
            if (fmt != "binary_little_endian") throw fail(line_start, "unsupported format '" + fmt + "'");
            have_format = true;
        } else if (kw == "element") {
            std::string name;
            long long count = -1;
            in >> name >> count;
            if (!in || count < 0) throw fail(line_start, "bad element line");
            if (name == "vertex") {
                if (seen_vertex) throw fail(line_start, "duplicate vertex element");
                vertex_count = std::size_t(count);
                in_vertex = seen_vertex = true;
            } else {
                if (!seen_vertex) throw fail(line_start, "element '" + name + "' before vertex");
                in_vertex = false;
            }
        } else if (kw == "property") {
            std::string type_name, name;
            in >> type_name;
            if (!in_vertex) continue;
            if (type_name == "list") throw fail(line_start, "list property in vertex element");
            in >> name;
            PlyType type;
            if (!in || !parse_ply_type(type_name, type)) throw fail(line_start, "bad property line");
            props.push_back({name, type, stride});
            stride += ply_size(type);
        } else {
            throw fail(line_start, "unknown header keyword '" + kw + "'");
        }
    }
    if (!have_format) throw fail(line_start, "missing format line");
    if (!seen_vertex) throw fail(line_start, "missing vertex element");

    auto find = [&](const char* name) -> const PlyProperty* {
        for (const auto& p : props)
            if (p.name == name) return &p;
        return nullptr;
    };
    const PlyProperty* xyz[3] = {find("x"), find("y"), find("z")};
    if (!xyz[0] || !xyz[1] || !xyz[2]) throw fail(line_start, "vertex element lacks x/y/z");
    const PlyProperty* rgb[3] = {find("red"), find("green"), find("blue")};
    const bool has_color = rgb[0] && rgb[1] && rgb[2];

    const std::size_t data_start = pos;
    if (vertex_count > 0 && (bytes.size() - data_start) / stride < vertex_count) {
        const std::size_t complete = (bytes.size() - data_start) / stride;
        throw fail(data_start + complete * stride,
                   "truncated vertex data (" + std::to_string(complete) + " of " + std::to_string(vertex_count) +
                       " vertices)");
    }
    std::vector<SeedPoint> out(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        const std::uint8_t* row = bytes.data() + data_start + i * stride;
        for (int a = 0; a < 3; ++a) out[i].position[a] = ply_value(xyz[a]->type, row + xyz[a]->offset);
        if (has_color) {
            for (int a = 0; a < 3; ++a) {
                const double scale = rgb[a]->type == PlyType::UInt8 ? 255.0 : 1.0;
                out[i].color[a] = ply_value(rgb[a]->type, row + rgb[a]->offset) / scale;
            }
        }
        if (!out[i].position.allFinite()) throw fail(data_start + i * stride, "non-finite vertex position");
    }
    return out;
}

void write_ply(const fs::path& path, std::span<const SeedPoint> points) {
    std::string out = ply_header(points.size(), false);
    for (const auto& p : points) {
        for (int a = 0; a < 3; ++a) append_le(out, float(p.position[a]));
        for (int a = 0; a < 3; ++a) out.push_back(char(to_byte(p.color[a])));
    }
    write_file(path, out);
}

void export_ply(const Scene& scene, double t, const fs::path& path) {
    scene.validate();
    std::string out = ply_header(scene.points.size(), true);
    for (const auto& p : scene.points) {
        const auto d = deform_point(p, t);
        for (int a = 0; a < 3; ++a) append_le(out, float(d.mu_t[a]));
        for (int a = 0; a < 3; ++a) out.push_back(char(to_byte(0.5 + kShC0 * d.dc_t[a])));
        append_le(out, float(sigmoid(p.opacity_logit)));
    }
    write_file(path, out);
}

Camera camera_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("invalid camera: ") + e.what());
    }
    return camera_from_object(j);
}

std::string camera_to_json(const Camera& cam) { return camera_object(cam).dump(2); }

Dataset load_dataset(const fs::path& dir, std::uint64_t seed, int threads) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw Error("missing manifest: " + manifest_path.string());
    json manifest;
    try {
        const auto bytes = read_file(manifest_path);
        manifest = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw Error("invalid manifest " + manifest_path.string() + ": " + e.what());
    }

    struct Entry {
        fs::path image;
        Camera camera;
        double time = 0.0;
        bool holdout = false;
    };
    std::vector<Entry> entries;
    try {
        for (const auto& f : manifest.at("frames")) {
            Entry e;
            e.image = dir / f.at("image").get<std::string>();
            e.camera = camera_from_object(f.at("camera"));
            e.time = f.at("time").get<double>();
            if (!std::isfinite(e.time)) throw Error("non-finite frame time");
            e.holdout = f.value("holdout", false);
            entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error("invalid manifest " + manifest_path.string() + ": " + e.what());
    }
    if (entries.empty()) throw Error("manifest lists no frames");

    Dataset ds;
    double t_min = std::numeric_limits<double>::infinity(), t_max = -t_min;
    for (const auto& e : entries) {
        t_min = std::min(t_min, e.time);
        t_max = std::max(t_max, e.time);
    }
    const bool constant = !(t_max > t_min);
    if (constant) ds.warnings.push_back("all frames share one timestamp; normalized times are 0");

    std::vector<Frame> frames(entries.size());
    parallel_for(entries.size(), threads, [&](std::size_t i) {
        const Entry& e = entries[i];
        Frame& f = frames[i];
        f.camera = e.camera;
        f.t = constant ? 0.0 : (e.time - t_min) / (t_max - t_min);
        f.image = read_png(e.image);
        if (f.image.width != f.camera.width || f.image.height != f.camera.height) {
            throw Error("image " + e.image.string() + " does not match its camera dimensions");
        }
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        (entries[i].holdout ? ds.holdout : ds.train).push_back(std::move(frames[i]));
    }
    if (ds.train.empty()) throw Error("manifest has no training frames");
    std::vector<double> times;
    for (const auto* list : {&ds.train, &ds.holdout})
        for (const auto& f : *list) times.push_back(f.t);
    std::sort(times.begin(), times.end());
    ds.frame_count = int(std::unique(times.begin(), times.end()) - times.begin());

    fs::path ply;
    if (manifest.contains("points3d")) {
        ply = dir / manifest.at("points3d").get<std::string>();
        if (!fs::exists(ply)) throw Error("missing point cloud: " + ply.string());
    } else if (fs::exists(dir / "points.ply")) {
        ply = dir / "points.ply";
    }
    if (!ply.empty()) {
        ds.seeds = read_ply(ply);
        ds.seeds_from_ply = true;
        if (ds.seeds.empty()) throw Error("point cloud " + ply.string() + " has no vertices");
        return ds;
    }

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const auto* list : {&ds.train, &ds.holdout}) {
        for (const auto& f : *list) {
            lo = lo.cwiseMin(f.camera.center());
            hi = hi.cwiseMax(f.camera.center());
        }
    }
    const double span = std::max(1.0, (hi - lo).maxCoeff());
    for (int a = 0; a < 3; ++a) {
        if (hi[a] - lo[a] < 1e-6 * span) {
            lo[a] -= 0.5 * span;
            hi[a] += 0.5 * span;
        }
    }
    ds.warnings.push_back("no point cloud found; using " + std::to_string(kFallbackSeedCount) +
                          " random seed points in the camera bounding box");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ds.seeds.resize(kFallbackSeedCount);
    for (auto& s : ds.seeds) {
        for (int a = 0; a < 3; ++a) s.position[a] = lo[a] + (hi[a] - lo[a]) * u(rng);
    }
    return ds;
}

void write_dataset(const fs::path& dir, std::span<const Frame> train, std::span<const Frame> holdout,
                   std::span<const SeedPoint> seeds) {
    fs::create_directories(dir / "images");
    json frames = json::array();
    int index = 0;
    for (const auto* list : {&train, &holdout}) {
        const bool is_holdout = list == &holdout;
        for (const auto& f : *list) {
            char name[32];
            std::snprintf(name, sizeof(name), "images/%05d.png", index++);
            write_png(dir / name, f.image);
            frames.push_back(json{{"image", name}, {"time", f.t}, {"holdout", is_holdout}, {"camera", camera_object(f.camera)}});
        }
    }
    json manifest{{"frames", frames}};
    if (!seeds.empty()) {
        write_ply(dir / "points.ply", seeds);
        manifest["points3d"] = "points.ply";
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

} // namespace splatflow
