#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "log.hpp"

namespace tflow {

struct PreprocessParams {
    double nms_iou = 0.7;
    double humanity_min = 0.1;
    double det_score_min = 0.0;
};

/// Greedy non-maximum suppression for one frame. Candidates are visited by
/// descending det_score (ties by original order) and kept iff they overlap no
/// kept box with IOU >= iou_threshold. Survivors keep their input order.
inline std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold) {
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].det_score > detections[b].det_score;
    });
    std::vector<char> keep(detections.size(), 0);
    std::vector<std::size_t> kept;
    for (std::size_t i : order) {
        bool suppressed = false;
        for (std::size_t k : kept)
            if (iou(detections[i].box, detections[k].box) >= iou_threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) {
            kept.push_back(i);
            keep[i] = 1;
        }
    }
    std::vector<Detection> out;
    for (std::size_t i = 0; i < detections.size(); ++i)
        if (keep[i]) out.push_back(detections[i]);
    return out;
}

/// Drops a detection only when BOTH its humanity and det_score are below their minimums.
inline std::vector<Detection> score_filter(const std::vector<Detection>& detections, double humanity_min,
                                           double det_score_min) {
    std::vector<Detection> out;
    for (const auto& d : detections)
        if (!(d.humanity_value() < humanity_min && d.det_score < det_score_min)) out.push_back(d);
    return out;
}

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Assigns humanity = sigmoid(det_score) to detections that carry none.
/// Returns how many detections were filled.
inline std::size_t fill_missing_humanity(std::vector<Detection>& detections) {
    std::size_t filled = 0;
    for (auto& d : detections)
        if (!d.humanity) {
            d.humanity = sigmoid(d.det_score);
            ++filled;
        }
    if (filled > 0)
        log::info("humanity missing for " + std::to_string(filled) + " detections; using sigmoid(det_score)");
    return filled;
}

/// Groups detections by frame (ascending).
inline std::map<int, std::vector<Detection>> by_frame(const std::vector<Detection>& detections) {
    std::map<int, std::vector<Detection>> frames;
    for (const auto& d : detections) frames[d.frame].push_back(d);
    return frames;
}

/// Full proposal-selector stage over a sequence: humanity fill, per-frame NMS, score filter.
inline std::vector<Detection> preprocess(std::vector<Detection> detections, const PreprocessParams& params) {
    fill_missing_humanity(detections);
    std::vector<Detection> out;
    for (auto& [frame, dets] : by_frame(detections)) {
        auto kept = score_filter(nms(dets, params.nms_iou), params.humanity_min, params.det_score_min);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

}  // namespace tflow
