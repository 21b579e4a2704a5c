#pragma once

#include <cstdint>
#include <string>

#include "trainer.hpp"

namespace tflow {

/// Every tunable of the engine. Defaults are the documented engine defaults;
/// `step == 0` means "window / 4".
struct EngineConfig {
    // cost model
    double beta = 0.7;
    double gamma = 5.0;
    // Output-layer weights of both cost nets are scaled by this after Glorot
    // init; 0 starts every learned cost at exactly 0.
    double cost_init_scale = 0.0;
    // windows and graph
    int window = 30;
    int step = 0;
    int dt_max = 30;
    int gap_max = 30;
    // proposal selection
    double nms_iou = 0.7;
    double humanity_min = 0.1;
    double det_score_min = 0.0;
    // tracklet generation
    double theta_high = 0.8;
    double margin = 0.1;
    int affinity_epochs = 40;
    double affinity_lr = 1e-2;
    // association training
    double lr = 1e-3;
    int iterations = 200;
    int train_window = 30;
    int train_step = 15;
    Weighting weighting = Weighting::tl_tg;
    // features
    double missing_distance = 1.0;
    double kalman_measurement_std = 1.0 / 20.0;
    double kalman_process_std = 1.0 / 160.0;
    // post-processing validation
    double interp_humanity_min = 0.1;
    double interp_distance_max = 1.0;
    // run
    std::uint64_t seed = 42;
    int workers = 0;

    int effective_step() const { return step > 0 ? step : default_step(window); }
};

}  // namespace tflow
