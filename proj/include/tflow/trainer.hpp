#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cost_model.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "gt_labels.hpp"
#include "log.hpp"
#include "nnet.hpp"
#include "parallel.hpp"
#include "windows.hpp"

namespace tflow {

enum class Weighting { uniform, tl, tg, tl_tg };

inline std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::uniform: return "uniform";
        case Weighting::tl: return "TL";
        case Weighting::tg: return "TG";
        case Weighting::tl_tg: return "TL+TG";
    }
    return "uniform";
}

inline Weighting parse_weighting(const std::string& s) {
    if (s == "uniform") return Weighting::uniform;
    if (s == "TL" || s == "tl") return Weighting::tl;
    if (s == "TG" || s == "tg") return Weighting::tg;
    if (s == "TL+TG" || s == "tl+tg" || s == "tl_tg") return Weighting::tl_tg;
    throw ConfigError("unknown weighting scheme '" + s + "'");
}

/// Ground-truth identity of a tracklet: majority identity among its matched
/// boxes, with purity = majority count / length.
struct TrackletLabel {
    int identity = -1;
    double purity = 0.0;
    bool true_positive = false;
};

inline std::vector<TrackletLabel> label_tracklets(const std::vector<Tracklet>& tracklets,
                                                  const std::map<DetKey, int>& det_labels,
                                                  double purity_min = 0.8) {
    std::vector<TrackletLabel> out;
    for (const auto& t : tracklets) {
        std::map<int, int> votes;
        for (const auto& d : t.detections) {
            auto it = det_labels.find(key_of(d));
            if (it != det_labels.end()) ++votes[it->second];
        }
        TrackletLabel lab;
        int best = 0;
        for (auto [id, n] : votes)
            if (n > best) {
                best = n;
                lab.identity = id;
            }
        lab.purity = static_cast<double>(best) / static_cast<double>(t.length());
        lab.true_positive = lab.identity >= 0 && lab.purity >= purity_min;
        out.push_back(lab);
    }
    return out;
}

struct GroundTruthFlow {
    std::vector<int> x;
    std::vector<double> weights;
};

/// Target flow for a graph: TP tracklets are selected, consecutive TP
/// tracklets of one identity are linked (when the link edge exists), and
/// init/term close every chain. `labels` is indexed by tracklet id. Also
/// records the target on each edge's `gt` field.
inline std::vector<int> label_ground_truth(FlowGraph& g, const std::vector<TrackletLabel>& labels) {
    std::vector<int> x(g.edges.size(), 0);
    std::map<int, std::vector<int>> by_identity;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto& lab = labels.at(g.nodes[i]);
        if (!lab.true_positive) continue;
        x[g.det_edge(i)] = 1;
        by_identity[lab.identity].push_back(static_cast<int>(i));
    }
    std::map<std::pair<int, int>, int> successor;
    for (auto& [id, nodes] : by_identity) {
        std::stable_sort(nodes.begin(), nodes.end(), [&](int a, int b) { return g.first_frame[a] < g.first_frame[b]; });
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k) successor[{nodes[k], nodes[k + 1]}] = 1;
    }
    const std::size_t n = g.node_count();
    std::vector<int> in(n, 0), out(n, 0);
    for (std::size_t k = g.first_link(); k < g.edges.size(); ++k) {
        const auto& e = g.edges[k];
        if (successor.count({e.from, e.to})) {
            x[k] = 1;
            ++out[e.from];
            ++in[e.to];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        x[g.init_edge(i)] = x[g.det_edge(i)] - in[i];
        x[g.term_edge(i)] = x[g.det_edge(i)] - out[i];
    }
    if (!conserves_flow(g, x)) throw InternalError("ground-truth flow violates conservation");
    for (std::size_t k = 0; k < x.size(); ++k) g.edges[k].gt = x[k];
    return x;
}

/// Loss weights: init/term always 1; TL weighs det edges by tracklet length,
/// TG weighs link edges by their time gap.
inline std::vector<double> edge_weights(const FlowGraph& g, Weighting scheme) {
    const bool tl = scheme == Weighting::tl || scheme == Weighting::tl_tg;
    const bool tg = scheme == Weighting::tg || scheme == Weighting::tl_tg;
    std::vector<double> w(g.edges.size(), 1.0);
    for (std::size_t i = 0; i < g.node_count() && tl; ++i) w[g.det_edge(i)] = g.length[i];
    for (std::size_t k = g.first_link(); k < g.edges.size() && tg; ++k) w[k] = g.edges[k].dt;
    return w;
}

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> dL_dx;
};

/// Weighted squared error between solved and target flows.
inline LossAndGrad loss_and_grad(const std::vector<int>& x_star, const std::vector<int>& x_gt,
                                 const std::vector<double>& w) {
    if (x_star.size() != x_gt.size() || x_star.size() != w.size())
        throw PreconditionError("loss inputs have mismatched lengths");
    LossAndGrad r;
    r.dL_dx.resize(x_star.size());
    for (std::size_t i = 0; i < x_star.size(); ++i) {
        const double diff = static_cast<double>(x_star[i] - x_gt[i]);
        r.loss += w[i] * diff * diff;
        r.dL_dx[i] = 2.0 * w[i] * diff;
    }
    return r;
}

/// dL/dc = -dL/dx on det and link edges; init/term costs are fixed, so zero there.
inline std::vector<double> approximate_cost_grad(const FlowGraph& g, const std::vector<double>& dL_dx) {
    if (dL_dx.size() != g.edges.size()) throw PreconditionError("gradient does not match graph");
    std::vector<double> dc(dL_dx.size(), 0.0);
    for (std::size_t k = 0; k < dc.size(); ++k)
        if (g.edges[k].kind == EdgeKind::det || g.edges[k].kind == EdgeKind::link) dc[k] = -dL_dx[k];
    return dc;
}

/// One subgraph prepared for training: structure, targets, weights and the
/// standardized network inputs (fixed across iterations).
struct TrainingWindow {
    FlowGraph graph;
    GraphFeatures features;
    GraphInputs inputs;
    std::vector<int> x_gt;
    std::vector<double> weights;
};

struct TrainConfig {
    double lr = 1e-3;
    int iterations = 200;
    int window = 30;
    int step = 15;
    Weighting weighting = Weighting::tl_tg;
    int dt_max = 30;
    std::uint64_t seed = 42;
    int workers = 1;
    /// Keep the parameters with the lowest validation loss (needs validation windows).
    bool select_best = true;
    /// Validation is evaluated on iteration 1, every `validate_every`-th
    /// iteration and after the last one.
    int validate_every = 10;
};

/// Builds windows over a labeled sequence. `tracklets`, `motions` and `labels`
/// are indexed by tracklet id. Windows without nodes are skipped.
inline std::vector<TrainingWindow> make_training_windows(const std::vector<Tracklet>& tracklets,
                                                         const std::vector<TrackletMotion>& motions,
                                                         const std::vector<TrackletLabel>& labels,
                                                         int sequence_length, const TrainConfig& cfg,
                                                         double beta, const FeatureParams& fp = {}) {
    WindowPlan plan = plan_windows(sequence_length, cfg.window, cfg.step);
    assign_members(plan, tracklets);
    std::vector<TrainingWindow> out;
    for (const auto& w : plan.windows) {
        if (w.members.empty()) continue;
        std::vector<const Tracklet*> members;
        for (int id : w.members) members.push_back(&tracklets[id]);
        TrainingWindow tw;
        tw.graph = build_graph(members, cfg.dt_max, beta);
        tw.x_gt = label_ground_truth(tw.graph, labels);
        tw.weights = edge_weights(tw.graph, cfg.weighting);
        tw.features = compute_graph_features(tw.graph, tracklets, motions, fp);
        out.push_back(std::move(tw));
    }
    return out;
}

/// Computes network inputs for windows once the model's standardization is fixed.
inline void prepare_inputs(std::vector<TrainingWindow>& windows, const CostModel& m) {
    for (auto& w : windows) w.inputs = graph_inputs(m, w.features);
}

/// Fits the cost model's standardization on all features of the given windows.
inline void fit_standardization(CostModel& m, const std::vector<TrainingWindow>& windows) {
    std::vector<UnaryFeature> u;
    std::vector<PairwiseFeature> p;
    for (const auto& w : windows) {
        u.insert(u.end(), w.features.unary.begin(), w.features.unary.end());
        p.insert(p.end(), w.features.pairwise.begin(), w.features.pairwise.end());
    }
    fit_standardization(m, u, p);
}

struct IterationLog {
    int iteration = 0;
    double loss = 0.0;
    double mean_abs_det_tp = 0.0;
    double mean_abs_link_true = 0.0;
    double edge_accuracy = 0.0;
    double validation_loss = std::numeric_limits<double>::quiet_NaN();
};

/// Result of evaluating a model on one window: solved flow plus statistics.
struct WindowEval {
    FlowSolution solution;
    double loss = 0.0;
    std::vector<double> dL_dc;
    double abs_det_tp = 0.0;
    int n_det_tp = 0;
    double abs_link_true = 0.0;
    int n_link_true = 0;
    int correct = 0;
};

inline WindowEval evaluate_window(const CostModel& m, const TrainingWindow& tw) {
    FlowGraph g = tw.graph;
    assign_costs(m, g, tw.inputs);
    WindowEval ev;
    ev.solution = solve_min_cost(g);
    auto lg = loss_and_grad(ev.solution.x, tw.x_gt, tw.weights);
    ev.loss = lg.loss;
    ev.dL_dc = approximate_cost_grad(g, lg.dL_dx);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        ev.correct += ev.solution.x[k] == tw.x_gt[k];
        if (!tw.x_gt[k]) continue;
        if (g.edges[k].kind == EdgeKind::det) {
            ev.abs_det_tp += std::abs(g.edges[k].cost);
            ++ev.n_det_tp;
        } else if (g.edges[k].kind == EdgeKind::link) {
            ev.abs_link_true += std::abs(g.edges[k].cost);
            ++ev.n_link_true;
        }
    }
    return ev;
}

/// Aggregate statistics of a model over windows (loss is the per-window mean).
inline IterationLog evaluate_windows(const CostModel& m, const std::vector<TrainingWindow>& windows, int workers = 1) {
    std::vector<WindowEval> evals(windows.size());
    parallel_for(windows.size(), workers, [&](std::size_t k) { evals[k] = evaluate_window(m, windows[k]); });
    IterationLog log;
    double det = 0, link = 0;
    int nd = 0, nl = 0, correct = 0, total = 0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
        log.loss += evals[k].loss;
        det += evals[k].abs_det_tp;
        nd += evals[k].n_det_tp;
        link += evals[k].abs_link_true;
        nl += evals[k].n_link_true;
        correct += evals[k].correct;
        total += static_cast<int>(windows[k].x_gt.size());
    }
    if (!windows.empty()) log.loss /= static_cast<double>(windows.size());
    log.mean_abs_det_tp = nd ? det / nd : 0.0;
    log.mean_abs_link_true = nl ? link / nl : 0.0;
    log.edge_accuracy = total ? static_cast<double>(correct) / total : 1.0;
    return log;
}

struct TrainResult {
    CostModel model;
    std::vector<IterationLog> history;
    int best_iteration = 0;
};

/// End-to-end cost learning. Each iteration solves every window with the
/// current costs, turns the flow error into cost gradients via
/// dL/dc = -dL/dx, backpropagates them through the unary (det) and pairwise
/// (link) networks, averages over windows in window order and takes one ADAM
/// step. An all-zero gradient skips the step, so x* = x_gt is a fixed point.
inline TrainResult train(const std::vector<TrainingWindow>& windows, CostModel model, const TrainConfig& cfg,
                         const std::vector<TrainingWindow>& validation = {}) {
    if (windows.empty()) throw PreconditionError("training needs at least one window");
    TrainResult result{model, {}, 0};
    double best_val = std::numeric_limits<double>::infinity();
    const bool track_best = cfg.select_best && !validation.empty();

    struct WindowGrad {
        std::vector<double> unary;
        std::vector<double> pairwise;
        WindowEval eval;
    };
    std::vector<WindowGrad> grads(windows.size());
    for (int it = 1; it <= cfg.iterations; ++it) {
        parallel_for(windows.size(), cfg.workers, [&](std::size_t k) {
            const TrainingWindow& tw = windows[k];
            WindowGrad& wg = grads[k];
            wg.eval = evaluate_window(model, tw);
            wg.unary.assign(model.unary_net.parameter_count(), 0.0);
            wg.pairwise.assign(model.pairwise_net.parameter_count(), 0.0);
            const FlowGraph& g = tw.graph;
            for (std::size_t i = 0; i < g.node_count(); ++i) {
                const double dc = wg.eval.dL_dc[g.det_edge(i)];
                if (dc == 0.0) continue;
                const Eigen::VectorXd in = tw.inputs.unary.col(static_cast<Eigen::Index>(i));
                auto fr = forward(model.unary_net, {in.data(), static_cast<std::size_t>(in.size())});
                backward_accumulate(model.unary_net, dc, fr.cache, wg.unary);
            }
            for (std::size_t l = 0; l < g.link_count(); ++l) {
                const double dc = wg.eval.dL_dc[g.first_link() + l];
                if (dc == 0.0) continue;
                const Eigen::VectorXd in = tw.inputs.pairwise.col(static_cast<Eigen::Index>(l));
                auto fr = forward(model.pairwise_net, {in.data(), static_cast<std::size_t>(in.size())});
                backward_accumulate(model.pairwise_net, dc, fr.cache, wg.pairwise);
            }
        });

        IterationLog log;
        log.iteration = it;
        std::vector<double> gu(model.unary_net.parameter_count(), 0.0);
        std::vector<double> gp(model.pairwise_net.parameter_count(), 0.0);
        double det = 0, link = 0;
        int nd = 0, nl = 0, correct = 0, total = 0;
        const double scale = 1.0 / static_cast<double>(windows.size());
        for (std::size_t k = 0; k < windows.size(); ++k) {
            const auto& wg = grads[k];
            log.loss += wg.eval.loss * scale;
            det += wg.eval.abs_det_tp;
            nd += wg.eval.n_det_tp;
            link += wg.eval.abs_link_true;
            nl += wg.eval.n_link_true;
            correct += wg.eval.correct;
            total += static_cast<int>(windows[k].x_gt.size());
            for (std::size_t p = 0; p < gu.size(); ++p) gu[p] += wg.unary[p] * scale;
            for (std::size_t p = 0; p < gp.size(); ++p) gp[p] += wg.pairwise[p] * scale;
        }
        log.mean_abs_det_tp = nd ? det / nd : 0.0;
        log.mean_abs_link_true = nl ? link / nl : 0.0;
        log.edge_accuracy = total ? static_cast<double>(correct) / total : 1.0;
        if (!std::isfinite(log.loss)) throw TrainingError("training loss is not finite at iteration " + std::to_string(it));

        if (track_best && (it == 1 || it % std::max(1, cfg.validate_every) == 0)) {
            log.validation_loss = evaluate_windows(model, validation, cfg.workers).loss;
            if (log.validation_loss < best_val) {
                best_val = log.validation_loss;
                result.model = model;
                result.best_iteration = it - 1;
            }
        }
        result.history.push_back(log);

        const bool any_u = std::any_of(gu.begin(), gu.end(), [](double v) { return v != 0.0; });
        const bool any_p = std::any_of(gp.begin(), gp.end(), [](double v) { return v != 0.0; });
        if (cfg.lr != 0.0 && any_u) adam_step(model.unary_net, gu, cfg.lr);
        if (cfg.lr != 0.0 && any_p) adam_step(model.pairwise_net, gp, cfg.lr);
    }
    if (track_best) {
        const double final_val = evaluate_windows(model, validation, cfg.workers).loss;
        if (final_val < best_val) {
            result.model = model;
            result.best_iteration = cfg.iterations;
        }
    } else {
        result.model = model;
        result.best_iteration = cfg.iterations;
    }
    return result;
}

/// Training log as CSV: one row per iteration.
inline void write_training_log(std::ostream& os, const std::vector<IterationLog>& history) {
    os << "iteration,loss,mean_abs_det_tp,mean_abs_link_true,edge_accuracy,validation_loss\n";
    for (const auto& h : history)
        os << h.iteration << ',' << exact_double(h.loss) << ',' << exact_double(h.mean_abs_det_tp) << ','
           << exact_double(h.mean_abs_link_true) << ',' << exact_double(h.edge_accuracy) << ','
           << (std::isnan(h.validation_loss) ? std::string() : exact_double(h.validation_loss)) << '\n';
}

}  // namespace tflow
