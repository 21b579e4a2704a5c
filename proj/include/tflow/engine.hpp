#pragma once

#include <optional>
#include <vector>

#include "config.hpp"
#include "cost_model.hpp"
#include "gt_labels.hpp"
#include "log.hpp"
#include "pipeline.hpp"
#include "preprocess.hpp"
#include "trainer.hpp"
#include "tracklet_generation.hpp"

namespace tflow {

/// A labeled sequence: detections, ground truth and its length in frames.
struct LabeledSequence {
    const std::vector<Detection>* detections = nullptr;
    const std::vector<Trajectory>* gt = nullptr;
    int length = 0;
};

inline PreprocessParams preprocess_params(const EngineConfig& cfg) {
    return {cfg.nms_iou, cfg.humanity_min, cfg.det_score_min};
}

inline TrainConfig train_config(const EngineConfig& cfg) {
    TrainConfig tc;
    tc.lr = cfg.lr;
    tc.iterations = cfg.iterations;
    tc.window = cfg.train_window;
    tc.step = cfg.train_step;
    tc.weighting = cfg.weighting;
    tc.dt_max = cfg.dt_max;
    tc.seed = cfg.seed;
    tc.workers = cfg.workers;
    return tc;
}

/// Trains the low-level affinity model on adjacent-frame pairs of the
/// selected proposals.
inline AffinityTrainResult fit_affinity(const LabeledSequence& seq, const EngineConfig& cfg) {
    const auto selected = preprocess(*seq.detections, preprocess_params(cfg));
    AffinityTrainConfig ac;
    ac.epochs = cfg.affinity_epochs;
    ac.lr = cfg.affinity_lr;
    ac.seed = cfg.seed;
    return train_affinity(affinity_training_pairs(selected, *seq.gt, 3.0, cfg.seed), ac);
}

/// Labeled training windows of one sequence under a given affinity model.
inline std::vector<TrainingWindow> association_windows(const LabeledSequence& seq, const AffinityModel& affinity,
                                                       const EngineConfig& cfg) {
    const auto selected = preprocess(*seq.detections, preprocess_params(cfg));
    const auto tracklets = generate_tracklets(selected, affinity, {cfg.theta_high, cfg.margin, cfg.workers});
    const FeatureParams fp = feature_params(cfg);
    const auto motions = fit_motions(tracklets, fp.kalman);
    const auto labels = label_tracklets(tracklets, label_detections(selected, *seq.gt));
    return make_training_windows(tracklets, motions, labels, seq.length, train_config(cfg), cfg.beta, fp);
}

struct TrainedSystem {
    Models models;
    double affinity_accuracy = 0.0;
    std::vector<IterationLog> history;
    int best_iteration = 0;
    /// Training and validation windows, inputs prepared for the final model.
    std::vector<TrainingWindow> training;
    std::vector<TrainingWindow> validation;
};

/// Trains the association cost model on top of a fixed affinity model. With a
/// validation sequence the parameters with the lowest validation loss are kept.
inline TrainedSystem train_association(const LabeledSequence& train_seq, const AffinityModel& affinity,
                                       const EngineConfig& cfg,
                                       const std::optional<LabeledSequence>& validation_seq = std::nullopt) {
    CostModelParams cp;
    cp.beta = cfg.beta;
    cp.gamma = cfg.gamma;
    cp.seed = cfg.seed;
    cp.output_init_scale = cfg.cost_init_scale;
    CostModel model = make_cost_model(cp);
    auto windows = association_windows(train_seq, affinity, cfg);
    if (windows.empty()) throw TrainingError("training sequence produced no tracklets");
    fit_standardization(model, windows);
    prepare_inputs(windows, model);
    TrainedSystem sys{{affinity, model}, 0.0, {}, 0, {}, {}};
    if (validation_seq) {
        sys.validation = association_windows(*validation_seq, affinity, cfg);
        prepare_inputs(sys.validation, model);
    }
    auto result = train(windows, model, train_config(cfg), sys.validation);
    sys.training = std::move(windows);
    sys.models.cost = std::move(result.model);
    sys.history = std::move(result.history);
    sys.best_iteration = result.best_iteration;
    return sys;
}

/// Affinity model first, then the association cost model, both on `train_seq`.
inline TrainedSystem train_system(const LabeledSequence& train_seq, const EngineConfig& cfg,
                                  const std::optional<LabeledSequence>& validation_seq = std::nullopt) {
    auto aff = fit_affinity(train_seq, cfg);
    log::info("affinity held-out accuracy " + std::to_string(aff.heldout_accuracy));
    TrainedSystem sys = train_association(train_seq, aff.model, cfg, validation_seq);
    sys.affinity_accuracy = aff.heldout_accuracy;
    return sys;
}

}  // namespace tflow
