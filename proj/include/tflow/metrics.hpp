#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "assignment.hpp"
#include "core_types.hpp"
#include "errors.hpp"
#include "numfmt.hpp"

namespace tflow {

struct FrameMatch {
    int gt_id = 0;
    int hyp_id = 0;
    double iou = 0.0;
};

struct EvalReport {
    double mota = 0.0;
    double motp = 0.0;
    int fp = 0;
    int fn = 0;
    int ids = 0;
    int gt_count = 0;
    int hyp_count = 0;
    int matches = 0;
    int gt_tracks = 0;
    double mt = 0.0;  // percent
    double ml = 0.0;  // percent
    std::map<int, std::vector<FrameMatch>> frame_matches;
};

/// CLEAR-MOT evaluation with match persistence.
///
/// Per frame, a ground-truth object keeps its previous hypothesis if that
/// hypothesis is present and still overlaps with IOU >= iou_min; the rest are
/// matched by Hungarian assignment maximizing IOU (pairs below iou_min are
/// forbidden). A ground-truth object matched to a hypothesis other than the one
/// it was last matched to counts one identity switch.
inline EvalReport evaluate(const std::vector<Trajectory>& hypotheses, const std::vector<Trajectory>& ground_truth,
                           double iou_min = 0.5) {
    using Boxes = std::vector<std::pair<int, BoundingBox>>;
    std::map<int, Boxes> gt_frames, hyp_frames;
    std::map<int, int> gt_length;
    for (const auto& t : ground_truth)
        for (const auto& e : t.entries) {
            gt_frames[e.frame].emplace_back(t.identity, e.box);
            ++gt_length[t.identity];
        }
    for (const auto& t : hypotheses)
        for (const auto& e : t.entries) hyp_frames[e.frame].emplace_back(t.identity, e.box);

    EvalReport r;
    for (const auto& [f, b] : gt_frames) r.gt_count += static_cast<int>(b.size());
    for (const auto& [f, b] : hyp_frames) r.hyp_count += static_cast<int>(b.size());
    if (r.gt_count == 0) throw PreconditionError("MOTA is undefined without ground-truth boxes");

    std::set<int> frames;
    for (const auto& [f, b] : gt_frames) frames.insert(f);
    for (const auto& [f, b] : hyp_frames) frames.insert(f);

    std::map<int, int> last_hyp_of_gt, last_gt_of_hyp, matched_frames;
    double iou_sum = 0.0;
    static const Boxes empty;
    for (int f : frames) {
        const auto git = gt_frames.find(f);
        const auto hit = hyp_frames.find(f);
        const Boxes& gts = git == gt_frames.end() ? empty : git->second;
        const Boxes& hyps = hit == hyp_frames.end() ? empty : hit->second;
        std::vector<int> gt_to(gts.size(), -1);
        std::vector<char> hyp_used(hyps.size(), 0);
        std::vector<double> pair_iou(gts.size(), 0.0);

        for (std::size_t g = 0; g < gts.size(); ++g) {
            auto prev = last_hyp_of_gt.find(gts[g].first);
            if (prev == last_hyp_of_gt.end() || last_gt_of_hyp[prev->second] != gts[g].first) continue;
            for (std::size_t h = 0; h < hyps.size(); ++h) {
                if (hyps[h].first != prev->second || hyp_used[h]) continue;
                const double o = iou(gts[g].second, hyps[h].second);
                if (o >= iou_min) {
                    gt_to[g] = static_cast<int>(h);
                    hyp_used[h] = 1;
                    pair_iou[g] = o;
                }
                break;
            }
        }
        std::vector<std::size_t> free_g, free_h;
        for (std::size_t g = 0; g < gts.size(); ++g)
            if (gt_to[g] < 0) free_g.push_back(g);
        for (std::size_t h = 0; h < hyps.size(); ++h)
            if (!hyp_used[h]) free_h.push_back(h);
        CostMatrix m(free_g.size(), free_h.size(), CostMatrix::forbidden);
        for (std::size_t a = 0; a < free_g.size(); ++a)
            for (std::size_t b = 0; b < free_h.size(); ++b) {
                const double o = iou(gts[free_g[a]].second, hyps[free_h[b]].second);
                if (o >= iou_min) m(a, b) = o;
            }
        for (auto [a, b] : solve_assignment(m, Objective::maximize)) {
            const std::size_t g = free_g[a], h = free_h[b];
            gt_to[g] = static_cast<int>(h);
            pair_iou[g] = m(a, b);
            const int gid = gts[g].first, hid = hyps[h].first;
            auto prev = last_hyp_of_gt.find(gid);
            if (prev != last_hyp_of_gt.end() && prev->second != hid) ++r.ids;
        }

        int matched = 0;
        auto& list = r.frame_matches[f];
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_to[g] < 0) continue;
            const int gid = gts[g].first, hid = hyps[gt_to[g]].first;
            last_hyp_of_gt[gid] = hid;
            last_gt_of_hyp[hid] = gid;
            ++matched_frames[gid];
            iou_sum += pair_iou[g];
            list.push_back({gid, hid, pair_iou[g]});
            ++matched;
        }
        r.matches += matched;
        r.fp += static_cast<int>(hyps.size()) - matched;
        r.fn += static_cast<int>(gts.size()) - matched;
    }

    r.mota = 1.0 - static_cast<double>(r.fp + r.fn + r.ids) / r.gt_count;
    r.motp = r.matches ? iou_sum / r.matches : 0.0;
    r.gt_tracks = static_cast<int>(gt_length.size());
    int mt = 0, ml = 0;
    for (auto [id, len] : gt_length) {
        const double ratio = static_cast<double>(matched_frames[id]) / len;
        mt += ratio >= 0.8;
        ml += ratio <= 0.2;
    }
    if (r.gt_tracks) {
        r.mt = 100.0 * mt / r.gt_tracks;
        r.ml = 100.0 * ml / r.gt_tracks;
    }
    return r;
}

inline void write_report_table(std::ostream& os, const EvalReport& r) {
    os << std::left << std::setw(8) << "MOTA" << std::setw(8) << "MOTP" << std::setw(8) << "MT%" << std::setw(8)
       << "ML%" << std::setw(8) << "FP" << std::setw(8) << "FN" << std::setw(8) << "IDS" << "GT\n";
    os << std::setw(8) << fixed_double(100.0 * r.mota, 1) << std::setw(8) << fixed_double(100.0 * r.motp, 1)
       << std::setw(8) << fixed_double(r.mt, 1) << std::setw(8) << fixed_double(r.ml, 1) << std::setw(8) << r.fp
       << std::setw(8) << r.fn << std::setw(8) << r.ids << r.gt_count << '\n';
}

inline void write_report_csv(std::ostream& os, const EvalReport& r) {
    os << "mota,motp,mt,ml,fp,fn,ids,gt\n"
       << exact_double(r.mota) << ',' << exact_double(r.motp) << ',' << exact_double(r.mt) << ','
       << exact_double(r.ml) << ',' << r.fp << ',' << r.fn << ',' << r.ids << ',' << r.gt_count << '\n';
}

}  // namespace tflow
