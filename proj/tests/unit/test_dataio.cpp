// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include <splatflow/dataio.hpp>
#include <splatflow/dddm.hpp>

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace splatflow;
using namespace splatflow::testing;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("splatflow_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

template <typename T>
void put(std::string& out, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    out.append(raw, sizeof(T));
}

std::string expect_error(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    ADD_FAILURE() << "expected an Error";
    return {};
}

Frame small_frame(double t, const Vec3& eye, int size = 8) {
    Frame f;
    f.camera = Camera::look_at(eye, Vec3::Zero(), Vec3(0, -1, 0), 10.0, size, size);
    f.image = Image(size, size, 0.25);
    f.image.at(1, 2, 0) = 1.0;
    f.t = t;
    return f;
}

} // namespace

TEST(Png, RoundTripIsExactOnByteValues) {
    TempDir dir;
    Image img(7, 5);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = double((i * 37) % 256) / 255.0;
    write_png(dir.path() / "a.png", img);
    const Image back = read_png(dir.path() / "a.png");
    ASSERT_EQ(back.width, 7);
    ASSERT_EQ(back.height, 5);
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
}

TEST(Png, ClampsOnWrite) {
    TempDir dir;
    Image img(2, 1);
    img.data = {-0.5, 1.5, 0.5, 0, 0, 0};
    write_png(dir.path() / "c.png", img);
    const Image back = read_png(dir.path() / "c.png");
    EXPECT_EQ(back.data[0], 0.0);
    EXPECT_EQ(back.data[1], 1.0);
    EXPECT_NEAR(back.data[2], 128.0 / 255.0, 1e-12);
}

TEST(Png, Errors) {
    TempDir dir;
    EXPECT_THROW(read_png(dir.path() / "missing.png"), Error);
    spit(dir.path() / "bad.png", "not a png");
    EXPECT_THROW(read_png(dir.path() / "bad.png"), Error);
    EXPECT_THROW(write_png(dir.path() / "e.png", Image()), Error);
}

TEST(Npy, HeaderAndPayload) {
    TempDir dir;
    Image img(3, 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.5 * double(i);
    write_npy(dir.path() / "a.npy", img);
    const std::string bytes = slurp(dir.path() / "a.npy");
    ASSERT_EQ(bytes.substr(0, 8), std::string("\x93NUMPY\x01\x00", 8));
    std::uint16_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 8, 2);
    EXPECT_EQ((10 + header_len) % 64, 0u);
    const std::string header = bytes.substr(10, header_len);
    EXPECT_NE(header.find("'descr': '<f4'"), std::string::npos);
    EXPECT_NE(header.find("'shape': (2, 3, 3)"), std::string::npos);
    EXPECT_EQ(header.back(), '\n');
    ASSERT_EQ(bytes.size(), 10u + header_len + 4u * 18u);
    for (std::size_t i = 0; i < 18; ++i) {
        float v = 0.0f;
        std::memcpy(&v, bytes.data() + 10 + header_len + 4 * i, 4);
        EXPECT_EQ(v, float(0.5 * double(i)));
    }
}

TEST(Ply, MixedTypesAndExtraProperties) {
    TempDir dir;
    std::string bytes = "ply\nformat binary_little_endian 1.0\ncomment three points\nelement vertex 3\n"
                        "property double x\nproperty float y\nproperty short z\nproperty float nx\n"
                        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                        "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
    const double xs[3] = {0.125, -2.5, 1e3};
    const float ys[3] = {1.0f, 2.0f, -3.5f};
    const std::int16_t zs[3] = {-7, 0, 12};
    for (int i = 0; i < 3; ++i) {
        put(bytes, xs[i]);
        put(bytes, ys[i]);
        put(bytes, zs[i]);
        put(bytes, 9.0f);
        bytes.push_back(char(255));
        bytes.push_back(char(0));
        bytes.push_back(char(51 * i));
    }
    spit(dir.path() / "p.ply", bytes);
    const auto pts = read_ply(dir.path() / "p.ply");
    ASSERT_EQ(pts.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(pts[std::size_t(i)].position, Vec3(xs[i], ys[i], zs[i]));
        EXPECT_EQ(pts[std::size_t(i)].color, Vec3(1.0, 0.0, 51.0 * i / 255.0));
    }
}

TEST(Ply, MissingColorDefaultsToGray) {
    TempDir dir;
    std::string bytes = "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\nproperty float z\nend_header\n";
    put(bytes, 1.0f);
    put(bytes, 2.0f);
    put(bytes, 3.0f);
    spit(dir.path() / "p.ply", bytes);
    const auto pts = read_ply(dir.path() / "p.ply");
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].color, Vec3::Constant(0.5));
}

TEST(Ply, ErrorsReportByteOffsets) {
    TempDir dir;
    const std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
                               "property float x\nproperty float y\nproperty float z\nend_header\n";
    std::string truncated = header;
    for (int i = 0; i < 4; ++i) put(truncated, 1.0f);
    spit(dir.path() / "t.ply", truncated);
    std::string msg = expect_error([&] { read_ply(dir.path() / "t.ply"); });
    EXPECT_NE(msg.find("byte offset " + std::to_string(header.size() + 12)), std::string::npos) << msg;

    spit(dir.path() / "a.ply", "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n");
    msg = expect_error([&] { read_ply(dir.path() / "a.ply"); });
    EXPECT_NE(msg.find("byte offset 4"), std::string::npos) << msg;

    spit(dir.path() / "m.ply", "plx\n");
    msg = expect_error([&] { read_ply(dir.path() / "m.ply"); });
    EXPECT_NE(msg.find("byte offset 0"), std::string::npos) << msg;

    spit(dir.path() / "n.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\n"
                               "property float y\nend_header\n");
    EXPECT_THROW(read_ply(dir.path() / "n.ply"), Error);
    spit(dir.path() / "u.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
    EXPECT_THROW(read_ply(dir.path() / "u.ply"), Error);
}

TEST(Ply, WriteReadRoundTrip) {
    TempDir dir;
    std::vector<SeedPoint> pts{{Vec3(0.5, -1.25, 2.0), Vec3(1, 0, 0)}, {Vec3(3, 4, 5), Vec3(0, 0.2, 1)}};
    write_ply(dir.path() / "r.ply", pts);
    const auto back = read_ply(dir.path() / "r.ply");
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back[i].position, pts[i].position);
        EXPECT_NEAR((back[i].color - pts[i].color).cwiseAbs().maxCoeff(), 0.0, 0.5 / 255.0);
    }
}

TEST(ExportPly, SinglePointLayout) {
    TempDir dir;
    Scene s;
    s.sh_degree = 0;
    s.poly_order = 1;
    s.fourier_order = 0;
    DynamicGaussian p(1, 0, 0);
    p.mu0 = Vec3(1, 2, 3);
    p.curve(0).poly_coeffs()[1] = 0.5;
    p.opacity_logit = 0.0;
    s.points.push_back(p);
    export_ply(s, 1.0, dir.path() / "e.ply");
    const std::string bytes = slurp(dir.path() / "e.ply");
    const std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
                               "property float x\nproperty float y\nproperty float z\n"
                               "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                               "property float opacity\nend_header\n";
    ASSERT_EQ(bytes.substr(0, header.size()), header);
    ASSERT_EQ(bytes.size(), header.size() + 19);
    float x = 0.0f, opacity = 0.0f;
    std::memcpy(&x, bytes.data() + header.size(), 4);
    std::memcpy(&opacity, bytes.data() + header.size() + 15, 4);
    EXPECT_EQ(x, float(deform_point(p, 1.0).mu_t.x()));
    EXPECT_EQ(opacity, 0.5f);
    EXPECT_EQ(std::uint8_t(bytes[header.size() + 12]), 128);
}

TEST(ExportPly, MatchesDeformedPositions) {
    TempDir dir;
    std::mt19937_64 rng(2);
    RandomSceneOptions o;
    o.points = 5;
    const Scene s = random_scene(rng, o);
    export_ply(s, 0.4, dir.path() / "e.ply");
    const auto back = read_ply(dir.path() / "e.ply");
    ASSERT_EQ(back.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        const Vec3 mu = deform_point(s.points[i], 0.4).mu_t;
        EXPECT_EQ(back[i].position, mu.cast<float>().cast<double>());
    }
}

TEST(Camera, JsonRoundTripAndErrors) {
    const Camera cam = Camera::look_at(Vec3(1, 2, 3), Vec3::Zero(), Vec3(0, -1, 0), 42.0, 30, 20);
    const Camera back = camera_from_json(camera_to_json(cam));
    EXPECT_EQ(back.world_to_cam, cam.world_to_cam);
    EXPECT_EQ(back.width, 30);
    EXPECT_EQ(back.fx, 42.0);
    EXPECT_THROW(camera_from_json("{"), Error);
    EXPECT_THROW(camera_from_json(R"({"fx": 1})"), Error);
    EXPECT_THROW(camera_from_json(R"({"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"height":4,"world_to_cam":[1,0,0]})"),
                 Error);
}

TEST(Dataset, TimesNormalizeJointly) {
    TempDir dir;
    const std::vector<Frame> train{small_frame(3.0, Vec3(0, 0, -4)), small_frame(5.0, Vec3(1, 0, -4))};
    const std::vector<Frame> holdout{small_frame(7.0, Vec3(0, 1, -4))};
    const std::vector<SeedPoint> seeds{{Vec3(0, 0, 0), Vec3(1, 0, 0)}, {Vec3(0.1, 0, 0), Vec3(0, 1, 0)}};
    write_dataset(dir.path(), train, holdout, seeds);
    const Dataset ds = load_dataset(dir.path());
    ASSERT_EQ(ds.train.size(), 2u);
    ASSERT_EQ(ds.holdout.size(), 1u);
    EXPECT_EQ(ds.train[0].t, 0.0);
    EXPECT_EQ(ds.train[1].t, 0.5);
    EXPECT_EQ(ds.holdout[0].t, 1.0);
    EXPECT_EQ(ds.frame_count, 3);
    EXPECT_TRUE(ds.seeds_from_ply);
    EXPECT_TRUE(ds.warnings.empty());
    ASSERT_EQ(ds.seeds.size(), 2u);
    EXPECT_NEAR(ds.train[0].image.at(1, 2, 0), 1.0, 1e-12);
    EXPECT_NEAR(ds.train[0].image.at(0, 0, 1), 64.0 / 255.0, 1e-12);
    EXPECT_NEAR((ds.holdout[0].camera.center() - Vec3(0, 1, -4)).norm(), 0.0, 1e-12);
}

TEST(Dataset, ConstantTimeWarns) {
    TempDir dir;
    const std::vector<Frame> train{small_frame(2.0, Vec3(0, 0, -4)), small_frame(2.0, Vec3(1, 0, -4))};
    const std::vector<SeedPoint> seeds{{Vec3(0, 0, 0), Vec3(1, 0, 0)}};
    write_dataset(dir.path(), train, {}, seeds);
    const Dataset ds = load_dataset(dir.path());
    EXPECT_EQ(ds.train[1].t, 0.0);
    EXPECT_EQ(ds.frame_count, 1);
    ASSERT_EQ(ds.warnings.size(), 1u);
}

TEST(Dataset, FallbackSeedsFillCameraBox) {
    TempDir dir;
    // Cameras on the plane y = 0: the degenerate axis is padded.
    const std::vector<Frame> train{small_frame(0.0, Vec3(-2, 0, -4)), small_frame(1.0, Vec3(2, 0, 4))};
    write_dataset(dir.path(), train, {}, {});
    const Dataset a = load_dataset(dir.path(), 7);
    const Dataset b = load_dataset(dir.path(), 7);
    const Dataset c = load_dataset(dir.path(), 8);
    ASSERT_EQ(a.seeds.size(), std::size_t(kFallbackSeedCount));
    EXPECT_FALSE(a.seeds_from_ply);
    EXPECT_EQ(a.warnings.size(), 1u);
    Vec3 lo = Vec3::Constant(1e9), hi = -lo;
    for (const auto& s : a.seeds) {
        lo = lo.cwiseMin(s.position);
        hi = hi.cwiseMax(s.position);
    }
    EXPECT_GE(lo.x(), -2.0);
    EXPECT_LE(hi.x(), 2.0);
    EXPECT_GE(lo.y(), -4.0);
    EXPECT_LE(hi.y(), 4.0);
    EXPECT_LT(lo.y(), -3.9);
    EXPECT_GT(hi.z(), 3.9);
    EXPECT_EQ(a.seeds[17].position, b.seeds[17].position);
    EXPECT_NE(a.seeds[17].position, c.seeds[17].position);
}

TEST(Dataset, Errors) {
    TempDir dir;
    EXPECT_THROW(load_dataset(dir.path()), Error);
    spit(dir.path() / "manifest.json", R"({"frames": []})");
    EXPECT_THROW(load_dataset(dir.path()), Error);
    spit(dir.path() / "manifest.json", R"({"frames": [{"image": "x.png"}]})");
    EXPECT_THROW(load_dataset(dir.path()), Error);

    const std::vector<Frame> train{small_frame(0.0, Vec3(0, 0, -4))};
    write_dataset(dir.path(), train, {}, {});
    write_png(dir.path() / "images" / "00000.png", Image(4, 4));
    const std::string msg = expect_error([&] { load_dataset(dir.path()); });
    EXPECT_NE(msg.find("dimensions"), std::string::npos) << msg;

    const std::vector<Frame> only_holdout{small_frame(0.0, Vec3(0, 0, -4))};
    fs::remove_all(dir.path() / "images");
    write_dataset(dir.path(), {}, only_holdout, {});
    EXPECT_THROW(load_dataset(dir.path()), Error);
}
