#pragma once

#include "assignment.hpp"
#include "config.hpp"
#include "core_types.hpp"
#include "cost_model.hpp"
#include "engine.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "gt_labels.hpp"
#include "kalman.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "mot_io.hpp"
#include "nnet.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "plot.hpp"
#include "preprocess.hpp"
#include "synth.hpp"
#include "trainer.hpp"
#include "tracklet_features.hpp"
#include "tracklet_generation.hpp"
#include "windows.hpp"
