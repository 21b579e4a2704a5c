#pragma once

#include <algorithm>
#include <vector>

#include "core_types.hpp"
#include "errors.hpp"

namespace tflow {

struct Window {
    int start = 1;
    int end = 1;
    /// Ids of tracklets whose head or tail frame lies in [start, end].
    std::vector<int> members;
};

struct WindowPlan {
    int window = 30;
    int step = 8;
    std::vector<Window> windows;
};

/// Sliding windows of `window` frames advanced by `step` over frames
/// [1, sequence_length]; the last window is clipped to the sequence end.
inline WindowPlan plan_windows(int sequence_length, int window, int step) {
    if (window < 1) throw ConfigError("window size must be >= 1");
    if (step < 1 || step > window) throw ConfigError("window step must lie in [1, window]");
    WindowPlan plan{window, step, {}};
    if (sequence_length < 1) return plan;
    for (int start = 1;; start += step) {
        const int end = std::min(start + window - 1, sequence_length);
        plan.windows.push_back({start, end, {}});
        if (end >= sequence_length) break;
    }
    return plan;
}

/// Fills window membership: a tracklet belongs to every window containing its
/// head or its tail.
inline void assign_members(WindowPlan& plan, const std::vector<Tracklet>& tracklets) {
    for (auto& w : plan.windows) {
        w.members.clear();
        for (const auto& t : tracklets) {
            const bool head_in = t.first_frame() >= w.start && t.first_frame() <= w.end;
            const bool tail_in = t.last_frame() >= w.start && t.last_frame() <= w.end;
            if (head_in || tail_in) w.members.push_back(t.id);
        }
    }
}

/// Default step when none is configured: a quarter of the window, at least one frame.
inline int default_step(int window) { return std::max(1, window / 4); }

}  // namespace tflow
