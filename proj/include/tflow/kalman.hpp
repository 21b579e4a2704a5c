#pragma once

#include <Eigen/Dense>

#include "core_types.hpp"
#include "errors.hpp"

namespace tflow {

/// Noise model for the constant-velocity box filter. All standard deviations
/// are fractions of the box height so the filter is scale-free.
struct KalmanParams {
    double measurement_std = 1.0 / 20.0;
    double process_std = 1.0 / 160.0;
    /// Prior std of the velocity components at initialization (per frame).
    double initial_velocity_std = 1.0;
    /// Floor applied to predicted width/height.
    double min_size = 1e-3;
};

using KalmanVector = Eigen::Matrix<double, 8, 1>;
using KalmanMatrix = Eigen::Matrix<double, 8, 8>;

/// State (x, y, w, h, vx, vy, vw, vh). `direction` is +1 for a filter run
/// forward in time and -1 for one run over the reversed sequence; predictions
/// move `direction * dt` frames away from `frame`.
struct KalmanState {
    KalmanVector mean = KalmanVector::Zero();
    KalmanMatrix covariance = KalmanMatrix::Identity();
    int frame = 1;
    int direction = 1;

    BoundingBox box() const { return {mean(0), mean(1), mean(2), mean(3)}; }
    double velocity(int k) const { return mean(4 + k); }
};

namespace kalman_detail {

inline KalmanMatrix transition(int dt) {
    KalmanMatrix f = KalmanMatrix::Identity();
    for (int k = 0; k < 4; ++k) f(k, 4 + k) = dt;
    return f;
}

inline KalmanState initiate(const BoundingBox& z, int frame, int direction, const KalmanParams& p) {
    KalmanState s;
    s.mean << z.x, z.y, z.w, z.h, 0, 0, 0, 0;
    const double pos = p.measurement_std * z.h;
    const double vel = p.initial_velocity_std * z.h;
    KalmanVector var;
    var << pos * pos, pos * pos, pos * pos, pos * pos, vel * vel, vel * vel, vel * vel, vel * vel;
    s.covariance = var.asDiagonal();
    s.frame = frame;
    s.direction = direction;
    return s;
}

inline void propagate(KalmanState& s, const KalmanParams& p) {
    const KalmanMatrix f = transition(1);
    const double q = p.process_std * std::max(s.mean(3), p.min_size);
    s.mean = f * s.mean;
    s.covariance = f * s.covariance * f.transpose();
    s.covariance.diagonal().array() += q * q;
    s.frame += s.direction;
}

inline void correct(KalmanState& s, const BoundingBox& z, const KalmanParams& p) {
    Eigen::Matrix<double, 4, 8> hm = Eigen::Matrix<double, 4, 8>::Zero();
    hm.leftCols<4>().setIdentity();
    const double r = p.measurement_std * z.h;
    const Eigen::Matrix4d rm = Eigen::Vector4d::Constant(r * r).asDiagonal();
    const Eigen::Vector4d meas(z.x, z.y, z.w, z.h);

    const Eigen::Matrix4d innovation_cov = hm * s.covariance * hm.transpose() + rm;
    const Eigen::Matrix<double, 8, 4> gain =
        innovation_cov.llt().solve(hm * s.covariance).transpose();
    s.mean += gain * (meas - hm * s.mean);
    // Joseph form keeps the covariance symmetric positive semi-definite.
    const KalmanMatrix ikh = KalmanMatrix::Identity() - gain * hm;
    s.covariance = ikh * s.covariance * ikh.transpose() + gain * rm * gain.transpose();
    s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
}

template <class It>
KalmanState run(It first, It last, int direction, const KalmanParams& p) {
    if (first == last) throw PreconditionError("kalman fit needs a non-empty tracklet");
    KalmanState s = initiate(first->box, first->frame, direction, p);
    for (++first; first != last; ++first) {
        // Tracklets are frame-contiguous, so each step advances one frame.
        propagate(s, p);
        correct(s, first->box, p);
    }
    return s;
}

}  // namespace kalman_detail

/// Filters the tracklet forward; the result describes its last frame.
inline KalmanState fit_forward(const Tracklet& tracklet, const KalmanParams& params = {}) {
    return kalman_detail::run(tracklet.detections.begin(), tracklet.detections.end(), +1, params);
}

/// Filters the tracklet in reverse frame order; the result describes its first
/// frame, and its velocities point backward in time.
inline KalmanState fit_backward(const Tracklet& tracklet, const KalmanParams& params = {}) {
    return kalman_detail::run(tracklet.detections.rbegin(), tracklet.detections.rend(), -1, params);
}

/// Propagates the state `dt` steps along its filtering direction (mean and covariance).
inline KalmanState predict_state(const KalmanState& state, int dt, const KalmanParams& params = {}) {
    if (dt < 1) throw PreconditionError("prediction horizon must be >= 1");
    KalmanState s = state;
    for (int k = 0; k < dt; ++k) kalman_detail::propagate(s, params);
    return s;
}

/// Box expected `dt` steps along the filtering direction under constant velocity.
inline BoundingBox predict(const KalmanState& state, int dt, const KalmanParams& params = {}) {
    if (dt < 1) throw PreconditionError("prediction horizon must be >= 1");
    BoundingBox b{state.mean(0) + dt * state.mean(4), state.mean(1) + dt * state.mean(5),
                  state.mean(2) + dt * state.mean(6), state.mean(3) + dt * state.mean(7)};
    b.w = std::max(b.w, params.min_size);
    b.h = std::max(b.h, params.min_size);
    return b;
}

}  // namespace tflow
