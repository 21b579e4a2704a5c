#include <gtest/gtest.h>

#include <random>

#include <tflow/core_types.hpp>
#include <tflow/errors.hpp>

using namespace tflow;

namespace {

// Pixel-count IOU for integer boxes.
double raster_iou(const BoundingBox& a, const BoundingBox& b) {
    int inter = 0, uni = 0;
    for (int y = -1; y < 40; ++y)
        for (int x = -1; x < 40; ++x) {
            const double cx = x + 0.5, cy = y + 0.5;
            const bool ia = cx > a.x && cx < a.right() && cy > a.y && cy < a.bottom();
            const bool ib = cx > b.x && cx < b.right() && cy > b.y && cy < b.bottom();
            inter += ia && ib;
            uni += ia || ib;
        }
    return uni ? static_cast<double>(inter) / uni : 0.0;
}

Detection det(int frame, double x, std::vector<double> emb = {}) {
    Detection d;
    d.frame = frame;
    d.box = {x, 0, 2, 4};
    d.embedding = std::move(emb);
    return d;
}

}  // namespace

TEST(Iou, IdenticalBoxes) { EXPECT_DOUBLE_EQ(iou({1, 2, 3, 4}, {1, 2, 3, 4}), 1.0); }

TEST(Iou, DisjointBoxes) { EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {5, 5, 1, 1}), 0.0); }

TEST(Iou, HalfShifted) { EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 0, 2, 2}), 2.0 / 6.0, 1e-12); }

TEST(Iou, MatchesRasterizedCount) {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> pos(0, 20), size(1, 15);
    for (int k = 0; k < 300; ++k) {
        const BoundingBox a{double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))};
        const BoundingBox b{double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))};
        EXPECT_NEAR(iou(a, b), raster_iou(a, b), 1e-12);
        EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    }
}

TEST(RelativePosition, Examples) {
    const auto zero = relative_position_distance({1, 1, 3, 3}, {1, 1, 3, 3});
    for (double v : zero) EXPECT_DOUBLE_EQ(v, 0.0);
    const auto dx = relative_position_distance({0, 0, 4, 4}, {2, 0, 4, 4});
    EXPECT_DOUBLE_EQ(dx[0], 0.5);
    EXPECT_DOUBLE_EQ(dx[1], 0.0);
    EXPECT_DOUBLE_EQ(dx[2], 0.0);
    EXPECT_DOUBLE_EQ(dx[3], 0.0);
    const auto dw = relative_position_distance({0, 0, 2, 4}, {0, 0, 4, 4});
    EXPECT_DOUBLE_EQ(dw[0], 0.0);
    EXPECT_DOUBLE_EQ(dw[2], 0.5);
    EXPECT_DOUBLE_EQ(dw[3], 0.0);
}

TEST(Embedding, NormalizedHasUnitNorm) {
    const auto v = normalized({3.0, 4.0});
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
    EXPECT_DOUBLE_EQ(l2_norm(v), 1.0);
}

TEST(Tracklet, ConsecutiveFramesAndMeanEmbedding) {
    const Tracklet t = make_tracklet(4, {det(3, 0, {1, 0}), det(4, 1, {0, 1}), det(5, 2, {1, 0})});
    EXPECT_EQ(t.id, 4);
    EXPECT_EQ(t.first_frame(), 3);
    EXPECT_EQ(t.last_frame(), 5);
    EXPECT_EQ(t.length(), 3);
    EXPECT_DOUBLE_EQ(t.tail().box.x, 2.0);
    EXPECT_NEAR(l2_norm(t.mean_embedding), 1.0, 1e-12);
    EXPECT_NEAR(t.mean_embedding[0] / t.mean_embedding[1], 2.0, 1e-12);
}

TEST(Tracklet, RejectsGapsAndEmpty) {
    EXPECT_THROW(make_tracklet(0, {}), PreconditionError);
    EXPECT_THROW(make_tracklet(0, {det(1, 0), det(3, 0)}), PreconditionError);
}
