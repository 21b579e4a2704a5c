#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "core_types.hpp"
#include "errors.hpp"
#include "kalman.hpp"
#include "tracklet_generation.hpp"

namespace tflow {

/// Median with the mean-of-middle-two convention for even sizes.
inline double median(std::vector<double> v) {
    if (v.empty()) throw PreconditionError("median of empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    if (v.size() % 2 == 1) return v[mid];
    const double upper = v[mid];
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    return 0.5 * (lower + upper);
}

struct UnaryFeature {
    double median_humanity = 0.0;
    double median_det_score = 0.0;
    double length = 0.0;
    // Summary statistics that fill the unary network's remaining inputs.
    double min_humanity = 0.0;
    double min_det_score = 0.0;
    double mean_humanity = 0.0;
    double mean_det_score = 0.0;
};

inline UnaryFeature unary_feature(const Tracklet& t) {
    if (t.detections.empty()) throw PreconditionError("unary feature of empty tracklet");
    std::vector<double> hum, score;
    for (const auto& d : t.detections) {
        hum.push_back(d.humanity_value());
        score.push_back(d.det_score);
    }
    UnaryFeature f;
    f.median_humanity = median(hum);
    f.median_det_score = median(score);
    f.length = static_cast<double>(t.length());
    f.min_humanity = *std::min_element(hum.begin(), hum.end());
    f.min_det_score = *std::min_element(score.begin(), score.end());
    const double n = static_cast<double>(hum.size());
    for (std::size_t k = 0; k < hum.size(); ++k) {
        f.mean_humanity += hum[k] / n;
        f.mean_det_score += score[k] / n;
    }
    return f;
}

struct PairwiseFeature {
    static constexpr int dimension = 18;

    double d_a = 0.0;
    double d_A = 1.0;
    double d_S = 1.0;
    /// Relative-position distances of (forward estimate, head), (tail, backward
    /// estimate), (tail, head), each divided by dt.
    std::array<double, 12> d_p_U{};
    double len_i = 1.0;
    double len_j = 1.0;
    double dt = 1.0;

    std::array<double, dimension> values() const {
        std::array<double, dimension> v{};
        v[0] = d_a;
        v[1] = d_A;
        v[2] = d_S;
        std::copy(d_p_U.begin(), d_p_U.end(), v.begin() + 3);
        v[15] = len_i;
        v[16] = len_j;
        v[17] = dt;
        return v;
    }
};

struct FeatureParams {
    KalmanParams kalman;
    /// d_a used when either tracklet has no embedding.
    double missing_distance = 1.0;
};

/// Kalman fits for one tracklet, computed once and reused for all its pairs.
struct TrackletMotion {
    KalmanState forward;
    KalmanState backward;
};

inline TrackletMotion fit_motion(const Tracklet& t, const KalmanParams& p = {}) {
    return {fit_forward(t, p), fit_backward(t, p)};
}

inline PairwiseFeature pairwise_feature(const Tracklet& fi, const TrackletMotion& mi, const Tracklet& fj,
                                        const TrackletMotion& mj, const FeatureParams& params = {}) {
    const int ti = fi.last_frame();
    const int tj = fj.first_frame();
    if (tj <= ti)
        throw PreconditionError("pairwise feature needs tracklet " + std::to_string(fi.id) + " to end before " +
                                std::to_string(fj.id) + " starts");
    const int dt = tj - ti;
    PairwiseFeature f;
    f.d_a = !fi.mean_embedding.empty() && !fj.mean_embedding.empty()
                ? appearance_distance(fi.mean_embedding, fj.mean_embedding)
                : params.missing_distance;
    const BoundingBox& tail = fi.tail().box;
    const BoundingBox& head = fj.head().box;
    f.d_A = tail.aspect() / head.aspect();
    f.d_S = tail.area() / head.area();
    const BoundingBox fwd = predict(mi.forward, dt, params.kalman);
    const BoundingBox bwd = predict(mj.backward, dt, params.kalman);
    const std::array<std::array<double, 4>, 3> parts = {relative_position_distance(fwd, head),
                                                        relative_position_distance(tail, bwd),
                                                        relative_position_distance(tail, head)};
    for (int p = 0; p < 3; ++p)
        for (int k = 0; k < 4; ++k) f.d_p_U[4 * p + k] = parts[p][k] / dt;
    f.len_i = fi.length();
    f.len_j = fj.length();
    f.dt = dt;
    return f;
}

inline PairwiseFeature pairwise_feature(const Tracklet& fi, const Tracklet& fj, const FeatureParams& params = {}) {
    return pairwise_feature(fi, fit_motion(fi, params.kalman), fj, fit_motion(fj, params.kalman), params);
}

}  // namespace tflow
