#pragma once

#include <map>
#include <utility>
#include <vector>

#include "assignment.hpp"
#include "core_types.hpp"

namespace tflow {

/// (frame, index-within-frame) identifies a detection across modules and files.
using DetKey = std::pair<int, int>;

inline DetKey key_of(const Detection& d) { return {d.frame, d.index}; }

/// Ground-truth boxes indexed by frame: frame -> [(identity, box)].
using GroundTruthFrames = std::map<int, std::vector<std::pair<int, BoundingBox>>>;

inline GroundTruthFrames gt_by_frame(const std::vector<Trajectory>& gt) {
    GroundTruthFrames frames;
    for (const auto& t : gt)
        for (const auto& e : t.entries) frames[e.frame].emplace_back(t.identity, e.box);
    return frames;
}

/// Assigns each detection the ground-truth identity it matches in its frame
/// (one-to-one per frame, maximizing IOU, pairs below iou_min forbidden).
/// Unmatched detections are absent from the result.
inline std::map<DetKey, int> label_detections(const std::vector<Detection>& detections,
                                              const std::vector<Trajectory>& gt, double iou_min = 0.5) {
    const GroundTruthFrames gt_frames = gt_by_frame(gt);
    std::map<int, std::vector<const Detection*>> det_frames;
    for (const auto& d : detections) det_frames[d.frame].push_back(&d);
    std::map<DetKey, int> labels;
    for (const auto& [frame, dets] : det_frames) {
        auto it = gt_frames.find(frame);
        if (it == gt_frames.end()) continue;
        const auto& boxes = it->second;
        CostMatrix m(dets.size(), boxes.size(), CostMatrix::forbidden);
        for (std::size_t i = 0; i < dets.size(); ++i)
            for (std::size_t j = 0; j < boxes.size(); ++j) {
                const double o = iou(dets[i]->box, boxes[j].second);
                if (o >= iou_min) m(i, j) = o;
            }
        for (auto [i, j] : solve_assignment(m, Objective::maximize)) labels[key_of(*dets[i])] = boxes[j].first;
    }
    return labels;
}

}  // namespace tflow
