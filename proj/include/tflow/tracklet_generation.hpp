#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "assignment.hpp"
#include "core_types.hpp"
#include "errors.hpp"
#include "gt_labels.hpp"
#include "nnet.hpp"
#include "parallel.hpp"

namespace tflow {

/// Euclidean distance between two embeddings of equal dimension.
inline double appearance_distance(std::span<const double> z1, std::span<const double> z2) {
    if (z1.size() != z2.size()) throw PreconditionError("embedding dimension mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < z1.size(); ++k) s += (z1[k] - z2[k]) * (z1[k] - z2[k]);
    return std::sqrt(s);
}

/// Feature of a candidate detection pair in adjacent frames.
struct PairFeature {
    static constexpr int dimension = 7;

    double d_a = 0.0;
    std::array<double, 4> d_p{};
    std::array<double, 2> humanity_pair{};

    std::array<double, dimension> values() const {
        return {d_a, d_p[0], d_p[1], d_p[2], d_p[3], humanity_pair[0], humanity_pair[1]};
    }
};

/// `missing_distance` stands in for d_a when either detection lacks an embedding.
inline PairFeature pair_feature(const Detection& a, const Detection& b, double missing_distance = 1.0) {
    PairFeature f;
    f.d_a = a.has_embedding() && b.has_embedding() ? appearance_distance(a.embedding, b.embedding)
                                                   : missing_distance;
    f.d_p = relative_position_distance(a.box, b.box);
    f.humanity_pair = {a.humanity_value(), b.humanity_value()};
    return f;
}

struct AffinityModel {
    DenseNet net;

    double score(const PairFeature& f) const {
        const auto v = f.values();
        return forward(net, v).output;
    }
};

/// [7, 16, 8, 1], leaky-ReLU hidden layers, sigmoid output.
inline AffinityModel make_affinity_model(std::uint64_t seed) {
    AffinityModel m{DenseNet({PairFeature::dimension, 16, 8, 1},
                             {{Activation::leaky_relu}, {Activation::leaky_relu}, {Activation::sigmoid}})};
    m.net.init_glorot(seed);
    return m;
}

struct LabeledPair {
    PairFeature feature;
    int label = 0;
};

struct AffinityTrainConfig {
    int epochs = 40;
    int batch_size = 64;
    double lr = 1e-2;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 7;
};

struct AffinityTrainResult {
    AffinityModel model;
    double heldout_accuracy = 0.0;
    std::vector<double> epoch_loss;
};

inline double affinity_accuracy(const AffinityModel& model, std::span<const LabeledPair> pairs) {
    if (pairs.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& p : pairs) correct += (model.score(p.feature) >= 0.5) == (p.label == 1);
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

/// Binary cross-entropy training with mini-batch ADAM. A seeded shuffle splits
/// off `holdout_fraction` of the pairs for the reported accuracy.
inline AffinityTrainResult train_affinity(std::vector<LabeledPair> pairs, const AffinityTrainConfig& cfg = {}) {
    const auto positives = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == 1; });
    if (positives == 0 || positives == static_cast<long>(pairs.size()))
        throw TrainingError("affinity training needs both positive and negative pairs");

    std::mt19937_64 rng(cfg.seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto holdout = static_cast<std::size_t>(cfg.holdout_fraction * static_cast<double>(pairs.size()));
    std::span<const LabeledPair> test(pairs.data(), holdout);
    std::vector<LabeledPair> train(pairs.begin() + static_cast<long>(holdout), pairs.end());

    AffinityTrainResult result{make_affinity_model(cfg.seed + 1), 0.0, {}};
    DenseNet& net = result.model.net;
    std::vector<double> grad(net.parameter_count());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const auto v = train[k].feature.values();
                auto fr = forward(net, v);
                const double y = std::clamp(fr.output, 1e-12, 1.0 - 1e-12);
                const double t = train[k].label;
                epoch_loss -= t * std::log(y) + (1 - t) * std::log(1 - y);
                // d BCE / dy; the sigmoid derivative is applied inside backward.
                const double upstream = (y - t) / (y * (1.0 - y)) / static_cast<double>(end - start);
                backward_accumulate(net, upstream, fr.cache, grad);
            }
            adam_step(net, grad, cfg.lr);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, train.size())));
        if (!std::isfinite(result.epoch_loss.back())) throw TrainingError("affinity training diverged");
    }
    result.heldout_accuracy = affinity_accuracy(result.model, test.empty() ? std::span<const LabeledPair>(train) : test);
    return result;
}

/// Labeled adjacent-frame pairs from ground truth: positive iff both detections
/// match the same identity. Negatives are subsampled to `negatives_per_positive`.
inline std::vector<LabeledPair> affinity_training_pairs(const std::vector<Detection>& detections,
                                                        const std::vector<Trajectory>& gt,
                                                        double negatives_per_positive = 3.0,
                                                        std::uint64_t seed = 11) {
    const auto labels = label_detections(detections, gt);
    std::map<int, std::vector<const Detection*>> frames;
    for (const auto& d : detections) frames[d.frame].push_back(&d);
    std::vector<LabeledPair> pos, neg;
    for (const auto& [frame, dets] : frames) {
        auto next = frames.find(frame + 1);
        if (next == frames.end()) continue;
        for (const Detection* a : dets)
            for (const Detection* b : next->second) {
                auto la = labels.find(key_of(*a));
                auto lb = labels.find(key_of(*b));
                const bool same = la != labels.end() && lb != labels.end() && la->second == lb->second;
                (same ? pos : neg).push_back({pair_feature(*a, *b), same ? 1 : 0});
            }
    }
    std::mt19937_64 rng(seed);
    std::shuffle(neg.begin(), neg.end(), rng);
    const auto keep = static_cast<std::size_t>(negatives_per_positive * static_cast<double>(pos.size()));
    if (neg.size() > keep) neg.resize(keep);
    pos.insert(pos.end(), neg.begin(), neg.end());
    return pos;
}

/// Keeps assignment pairs that are confident (y >= theta_high) and dominate
/// every competitor in their row and column by at least `margin`.
inline std::vector<std::pair<int, int>> gate_matches(const CostMatrix& affinity, double theta_high, double margin) {
    std::vector<std::pair<int, int>> kept;
    for (auto [i, j] : solve_assignment(affinity, Objective::maximize)) {
        const double y = affinity(i, j);
        bool ok = y >= theta_high;
        for (std::size_t k = 0; ok && k < affinity.cols(); ++k)
            if (static_cast<int>(k) != j && y < affinity(i, k) + margin) ok = false;
        for (std::size_t k = 0; ok && k < affinity.rows(); ++k)
            if (static_cast<int>(k) != i && y < affinity(k, j) + margin) ok = false;
        if (ok) kept.emplace_back(i, j);
    }
    return kept;
}

inline std::vector<std::pair<int, int>> match_adjacent(const std::vector<Detection>& frame_t,
                                                       const std::vector<Detection>& frame_t1,
                                                       const AffinityModel& model, double theta_high = 0.8,
                                                       double margin = 0.1) {
    CostMatrix y(frame_t.size(), frame_t1.size());
    for (std::size_t i = 0; i < frame_t.size(); ++i)
        for (std::size_t j = 0; j < frame_t1.size(); ++j) y(i, j) = model.score(pair_feature(frame_t[i], frame_t1[j]));
    return gate_matches(y, theta_high, margin);
}

/// Detections grouped by frame plus matches between frame f and f + 1, where
/// matches[f] holds (index in frames[f], index in frames[f + 1]).
struct FrameMatches {
    std::map<int, std::vector<Detection>> frames;
    std::map<int, std::vector<std::pair<int, int>>> matches;
};

/// Chains matched detections into tracklets. Every detection lands in exactly
/// one tracklet; ids are assigned in order of (first frame, index).
inline std::vector<Tracklet> build_tracklets(const FrameMatches& fm) {
    std::vector<std::vector<Detection>> chains;
    std::map<int, std::vector<int>> chain_of;  // frame -> chain index per detection
    for (const auto& [frame, dets] : fm.frames) {
        std::vector<int> owner(dets.size(), -1);
        auto prev_owner = chain_of.find(frame - 1);
        auto m = fm.matches.find(frame - 1);
        if (prev_owner != chain_of.end() && m != fm.matches.end()) {
            std::vector<char> used_prev(prev_owner->second.size(), 0);
            for (auto [i, j] : m->second) {
                if (i < 0 || j < 0 || i >= static_cast<int>(used_prev.size()) || j >= static_cast<int>(dets.size()))
                    throw PreconditionError("match index out of range");
                if (used_prev[i] || owner[j] != -1) throw PreconditionError("detection matched more than once");
                used_prev[i] = 1;
                owner[j] = prev_owner->second[i];
            }
        }
        for (std::size_t k = 0; k < dets.size(); ++k) {
            if (owner[k] == -1) {
                owner[k] = static_cast<int>(chains.size());
                chains.emplace_back();
            }
            chains[owner[k]].push_back(dets[k]);
        }
        chain_of[frame] = std::move(owner);
    }
    std::vector<Tracklet> out;
    out.reserve(chains.size());
    for (auto& c : chains) out.push_back(make_tracklet(static_cast<int>(out.size()), std::move(c)));
    return out;
}

struct TrackletParams {
    double theta_high = 0.8;
    double margin = 0.1;
    int workers = 1;
};

/// Low-level association over a whole sequence: score, match and gate every
/// adjacent frame pair, then chain the kept matches.
inline std::vector<Tracklet> generate_tracklets(const std::vector<Detection>& detections, const AffinityModel& model,
                                                const TrackletParams& params = {}) {
    FrameMatches fm;
    for (const auto& d : detections) fm.frames[d.frame].push_back(d);
    std::vector<int> starts;
    for (const auto& [frame, dets] : fm.frames)
        if (fm.frames.count(frame + 1)) starts.push_back(frame);
    std::vector<std::vector<std::pair<int, int>>> results(starts.size());
    parallel_for(starts.size(), params.workers, [&](std::size_t k) {
        const int f = starts[k];
        results[k] = match_adjacent(fm.frames.at(f), fm.frames.at(f + 1), model, params.theta_high, params.margin);
    });
    for (std::size_t k = 0; k < starts.size(); ++k) fm.matches[starts[k]] = std::move(results[k]);
    return build_tracklets(fm);
}

}  // namespace tflow
