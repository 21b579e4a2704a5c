#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace tflow {

/// Axis-aligned box in continuous pixel coordinates (left, top, width, height).
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    bool valid() const { return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y); }
    double area() const { return w * h; }
    double aspect() const { return w / h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

using Embedding = std::vector<double>;

struct Detection {
    int frame = 1;
    /// Position of the detection within its frame in the source file; keys sidecar rows.
    int index = 0;
    BoundingBox box;
    double det_score = 0.0;
    std::optional<double> humanity;
    /// Empty when no appearance embedding is available.
    Embedding embedding;

    double humanity_value() const { return humanity.value_or(0.0); }
    bool has_embedding() const { return !embedding.empty(); }
};

/// Temporally contiguous run of detections believed to share one identity.
struct Tracklet {
    int id = 0;
    std::vector<Detection> detections;
    Embedding mean_embedding;

    int first_frame() const { return detections.front().frame; }
    int last_frame() const { return detections.back().frame; }
    int length() const { return static_cast<int>(detections.size()); }
    const Detection& head() const { return detections.front(); }
    const Detection& tail() const { return detections.back(); }
};

struct TrajectoryEntry {
    int frame = 1;
    BoundingBox box;
    bool interpolated = false;
};

struct Trajectory {
    int identity = 0;
    std::vector<TrajectoryEntry> entries;

    int first_frame() const { return entries.front().frame; }
    int last_frame() const { return entries.back().frame; }
};

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Returns v scaled to unit length; a zero vector is returned unchanged.
inline Embedding normalized(Embedding v) {
    const double n = l2_norm(v);
    if (n > 0.0)
        for (double& x : v) x /= n;
    return v;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

/// Scale-normalized position/size difference between two boxes. Components 0
/// and 1 are symmetric in (p1, p2); the size components divide by p2.
inline std::array<double, 4> relative_position_distance(const BoundingBox& p1,
                                                        const BoundingBox& p2) {
    return {std::abs(p1.x - p2.x) / std::sqrt(p1.w * p2.w),
            std::abs(p1.y - p2.y) / std::sqrt(p1.h * p2.h),
            std::abs(p1.w - p2.w) / p2.w,
            std::abs(p1.h - p2.h) / p2.h};
}

/// Builds a tracklet from a consecutive-frame run and computes its mean embedding.
inline Tracklet make_tracklet(int id, std::vector<Detection> detections) {
    if (detections.empty()) throw PreconditionError("tracklet must contain at least one detection");
    for (std::size_t k = 1; k < detections.size(); ++k)
        if (detections[k].frame != detections[k - 1].frame + 1)
            throw PreconditionError("tracklet frames must be consecutive");
    Tracklet t{id, std::move(detections), {}};
    std::size_t dim = 0;
    for (const auto& d : t.detections)
        if (d.has_embedding()) dim = d.embedding.size();
    if (dim > 0) {
        Embedding sum(dim, 0.0);
        for (const auto& d : t.detections) {
            if (!d.has_embedding()) continue;
            if (d.embedding.size() != dim) throw PreconditionError("embedding dimension mismatch in tracklet");
            for (std::size_t k = 0; k < dim; ++k) sum[k] += d.embedding[k];
        }
        t.mean_embedding = normalized(std::move(sum));
    }
    return t;
}

}  // namespace tflow
