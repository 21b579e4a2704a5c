#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "assignment.hpp"
#include "config.hpp"
#include "core_types.hpp"
#include "cost_model.hpp"
#include "flow.hpp"
#include "log.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"
#include "tracklet_features.hpp"
#include "tracklet_generation.hpp"
#include "windows.hpp"

namespace tflow {

/// A chain of tracklet ids in temporal order.
using Chain = std::vector<int>;

/// Maximum-overlap pairing of two chain lists: entry (a, b) counts the
/// tracklets chain a of `earlier` shares with chain b of `later`. Pairs that
/// share nothing are never matched.
inline Assignment match_chains(const std::vector<Chain>& earlier, const std::vector<Chain>& later) {
    if (earlier.empty() || later.empty()) return {};
    CostMatrix overlap(earlier.size(), later.size(), CostMatrix::forbidden);
    for (std::size_t a = 0; a < earlier.size(); ++a)
        for (std::size_t b = 0; b < later.size(); ++b) {
            int shared = 0;
            for (int id : earlier[a]) shared += std::count(later[b].begin(), later[b].end(), id) > 0;
            if (shared > 0) overlap(a, b) = shared;
        }
    return solve_assignment(overlap, Objective::maximize);
}

/// Stitches per-window chains into sequence-level chains.
///
/// For each pair of adjacent windows, chains are matched by the number of
/// tracklets they share (maximum-overlap assignment; zero overlap is never
/// matched). A matched chain joins its partner's merged chain. An unmatched
/// one rejoins a merged chain that already owns some of its tracklets and
/// has no partner in this window, or else starts a new merged chain. Tracklets are added in temporal order.
/// A tracklet already owned by another merged chain, or one that overlaps in
/// time with a tracklet already in the target chain, is dropped: the earlier
/// window wins.
inline std::vector<Chain> merge_windows(const std::vector<std::vector<Chain>>& window_chains,
                                        const std::vector<Tracklet>& tracklets) {
    std::vector<Chain> groups;
    std::map<int, int> owner;
    std::vector<int> prev_group;
    const std::vector<Chain>* prev_chains = nullptr;
    std::size_t conflicts = 0;

    auto overlaps_group = [&](int group, int id) {
        const Tracklet& t = tracklets.at(id);
        for (int other : groups[group]) {
            const Tracklet& o = tracklets.at(other);
            if (t.first_frame() <= o.last_frame() && o.first_frame() <= t.last_frame()) return true;
        }
        return false;
    };

    for (const auto& chains : window_chains) {
        std::vector<int> cur_group(chains.size(), -1);
        std::vector<bool> taken(groups.size(), false);
        if (prev_chains)
            for (auto [a, b] : match_chains(*prev_chains, chains)) {
                cur_group[b] = prev_group[a];
                taken[prev_group[a]] = true;
            }
        // A tracklet longer than the window skips the windows it spans, so
        // its chain can be missing from the previous window. An unmatched
        // chain rejoins the free group that already owns most of its tracklets.
        for (std::size_t b = 0; b < chains.size(); ++b) {
            if (cur_group[b] >= 0) continue;
            std::map<int, int> votes;
            for (int id : chains[b])
                if (auto it = owner.find(id); it != owner.end() && !taken[it->second]) ++votes[it->second];
            int best = -1;
            for (auto [g, n] : votes)
                if (best < 0 || n > votes[best]) best = g;
            if (best >= 0) {
                cur_group[b] = best;
                taken[best] = true;
            }
        }
        for (std::size_t b = 0; b < chains.size(); ++b) {
            if (cur_group[b] < 0) {
                cur_group[b] = static_cast<int>(groups.size());
                groups.emplace_back();
            }
            const int g = cur_group[b];
            for (int id : chains[b]) {
                auto it = owner.find(id);
                if (it != owner.end()) {
                    conflicts += it->second != g;
                    continue;
                }
                if (overlaps_group(g, id)) {
                    ++conflicts;
                    continue;
                }
                groups[g].push_back(id);
                owner[id] = g;
            }
            std::sort(groups[g].begin(), groups[g].end(), [&](int x, int y) {
                return tracklets[x].first_frame() < tracklets[y].first_frame();
            });
        }
        prev_group = std::move(cur_group);
        prev_chains = &chains;
    }
    if (conflicts) log::debug("window merging dropped " + std::to_string(conflicts) + " conflicting tracklet claims");

    std::erase_if(groups, [](const Chain& c) { return c.empty(); });
    std::stable_sort(groups.begin(), groups.end(), [&](const Chain& a, const Chain& b) {
        return tracklets[a.front()].first_frame() < tracklets[b.front()].first_frame();
    });
    return groups;
}

/// Fills frame gaps of at most `gap_max` missing frames by linear
/// interpolation of (x, y, w, h). Filled entries are flagged.
inline Trajectory interpolate(const Trajectory& t, int gap_max) {
    Trajectory out{t.identity, {}};
    for (std::size_t k = 0; k < t.entries.size(); ++k) {
        if (k > 0) {
            const auto& a = t.entries[k - 1];
            const auto& b = t.entries[k];
            const int missing = b.frame - a.frame - 1;
            if (missing > 0 && missing <= gap_max) {
                const double span = b.frame - a.frame;
                for (int f = a.frame + 1; f < b.frame; ++f) {
                    const double s = (f - a.frame) / span;
                    const BoundingBox box{a.box.x + s * (b.box.x - a.box.x), a.box.y + s * (b.box.y - a.box.y),
                                          a.box.w + s * (b.box.w - a.box.w), a.box.h + s * (b.box.h - a.box.h)};
                    out.entries.push_back({f, box, true});
                }
            }
        }
        out.entries.push_back(t.entries[k]);
    }
    return out;
}

/// What a patch validator reports for a box: humanity and an appearance embedding.
struct PatchObservation {
    double humanity = 1.0;
    Embedding embedding;
};

using PatchValidator = std::function<std::optional<PatchObservation>(int frame, const BoundingBox& box)>;

struct ValidationParams {
    double humanity_min = 0.1;
    double distance_max = 1.0;
};

/// Removes interpolated entries whose patch looks like a non-person
/// (humanity < humanity_min) or unlike the trajectory (embedding farther than
/// distance_max from `reference`). Real entries are never removed. No
/// validator, or no observation for a box, keeps the entry.
inline Trajectory validate_interpolation(const Trajectory& t, const PatchValidator& validator,
                                         const Embedding& reference = {}, const ValidationParams& p = {}) {
    if (!validator) return t;
    Trajectory out{t.identity, {}};
    for (const auto& e : t.entries) {
        if (e.interpolated) {
            const auto obs = validator(e.frame, e.box);
            if (obs) {
                if (obs->humanity < p.humanity_min) continue;
                if (!reference.empty() && !obs->embedding.empty() &&
                    appearance_distance(obs->embedding, reference) > p.distance_max)
                    continue;
            }
        }
        out.entries.push_back(e);
    }
    return out;
}

struct Models {
    AffinityModel affinity;
    CostModel cost;
};

inline FeatureParams feature_params(const EngineConfig& cfg) {
    FeatureParams fp;
    fp.kalman.measurement_std = cfg.kalman_measurement_std;
    fp.kalman.process_std = cfg.kalman_process_std;
    fp.missing_distance = cfg.missing_distance;
    return fp;
}

/// Solves every window's subgraph with the cost model and returns the chains
/// (tracklet ids) of each window, in window order.
inline std::vector<std::vector<Chain>> associate_windows(const std::vector<Tracklet>& tracklets,
                                                         const std::vector<TrackletMotion>& motions,
                                                         const CostModel& model, const WindowPlan& plan,
                                                         int dt_max, const FeatureParams& fp, int workers) {
    std::vector<std::vector<Chain>> result(plan.windows.size());
    parallel_for(plan.windows.size(), workers, [&](std::size_t k) {
        const Window& w = plan.windows[k];
        std::vector<const Tracklet*> members;
        for (int id : w.members) members.push_back(&tracklets[id]);
        FlowGraph g = build_graph(members, dt_max, model.beta);
        assign_costs(model, g, compute_graph_features(g, tracklets, motions, fp));
        const FlowSolution sol = solve_min_cost(g);
        for (const auto& chain : sol.chains) {
            Chain ids;
            for (int node : chain) ids.push_back(g.nodes[node]);
            result[k].push_back(std::move(ids));
        }
    });
    return result;
}

inline std::vector<TrackletMotion> fit_motions(const std::vector<Tracklet>& tracklets, const KalmanParams& kp) {
    std::vector<TrackletMotion> motions;
    motions.reserve(tracklets.size());
    for (const auto& t : tracklets) motions.push_back(fit_motion(t, kp));
    return motions;
}

struct TrackOutput {
    std::vector<Trajectory> trajectories;
    std::vector<Tracklet> tracklets;
    std::vector<Chain> chains;
};

/// Full batch tracking: proposal selection, tracklet generation, windowed
/// flow association, subgraph merging, interpolation and validation.
/// `sequence_length` of 0 uses the last detection frame.
inline TrackOutput track_sequence(const std::vector<Detection>& detections, const Models& models,
                                  const EngineConfig& cfg, int sequence_length = 0,
                                  const PatchValidator& validator = nullptr) {
    TrackOutput out;
    if (detections.empty()) return out;
    const auto selected = preprocess(detections, {cfg.nms_iou, cfg.humanity_min, cfg.det_score_min});
    out.tracklets = generate_tracklets(selected, models.affinity, {cfg.theta_high, cfg.margin, cfg.workers});
    if (out.tracklets.empty()) return out;

    const FeatureParams fp = feature_params(cfg);
    const auto motions = fit_motions(out.tracklets, fp.kalman);
    if (sequence_length <= 0)
        for (const auto& d : detections) sequence_length = std::max(sequence_length, d.frame);
    WindowPlan plan = plan_windows(sequence_length, cfg.window, std::min(cfg.effective_step(), cfg.window));
    assign_members(plan, out.tracklets);
    const auto per_window = associate_windows(out.tracklets, motions, models.cost, plan, cfg.dt_max, fp, cfg.workers);
    out.chains = merge_windows(per_window, out.tracklets);

    const ValidationParams vp{cfg.interp_humanity_min, cfg.interp_distance_max};
    for (const auto& chain : out.chains) {
        Trajectory t{static_cast<int>(out.trajectories.size()) + 1, {}};
        Embedding sum;
        for (int id : chain)
            for (const auto& d : out.tracklets[id].detections) {
                t.entries.push_back({d.frame, d.box, false});
                if (d.has_embedding()) {
                    if (sum.empty()) sum.assign(d.embedding.size(), 0.0);
                    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += d.embedding[k];
                }
            }
        t = validate_interpolation(interpolate(t, cfg.gap_max), validator, normalized(sum), vp);
        out.trajectories.push_back(std::move(t));
    }
    return out;
}

}  // namespace tflow
