// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#include <splatflow/synthetic.hpp>

#include <gtest/gtest.h>

using namespace splatflow;

TEST(Synthetic, HoldoutCamerasInterleave) {
    SyntheticOptions o;
    std::vector<bool> holdout;
    const auto cams = ring_cameras(o, holdout);
    ASSERT_EQ(cams.size(), 10u);
    for (std::size_t k = 0; k < holdout.size(); ++k) EXPECT_EQ(holdout[k], k == 2 || k == 7) << k;
    for (const auto& c : cams) {
        // Every camera looks at the origin.
        const Vec3 p = c.translation();
        EXPECT_NEAR(p.x(), 0.0, 1e-12);
        EXPECT_NEAR(p.y(), 0.0, 1e-12);
        EXPECT_GT(p.z(), 0.0);
    }
    o.train_cameras = 0;
    o.holdout_cameras = 0;
    EXPECT_THROW(ring_cameras(o, holdout), Error);
}

TEST(Synthetic, FrameCountsAndMotion) {
    SyntheticOptions o;
    o.width = 16;
    o.height = 16;
    o.frames = 4;
    o.train_cameras = 3;
    o.holdout_cameras = 1;
    o.random_seeds = 5;
    const SyntheticDataset ds = make_synthetic_blobs(o);
    EXPECT_EQ(ds.train.size(), 12u);
    EXPECT_EQ(ds.holdout.size(), 4u);
    EXPECT_EQ(ds.ground_truth.points.size(), 72u);
    EXPECT_EQ(ds.seeds.size(), 77u);
    EXPECT_DOUBLE_EQ(ds.train.back().t, 1.0);

    const Vec3 d = ds.blob_offset(1, 0.6);
    const Scene moved = ds.ground_truth_at(0.6);
    for (std::size_t i = 0; i < moved.points.size(); ++i) {
        if (ds.blob_of[i] != 1) continue;
        EXPECT_TRUE((moved.points[i].mu0 - ds.ground_truth.points[i].mu0).isApprox(d));
    }
    const SyntheticDataset again = make_synthetic_blobs(o);
    EXPECT_EQ(again.train[5].image.data, ds.train[5].image.data);
}
