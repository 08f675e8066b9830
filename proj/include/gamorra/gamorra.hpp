#pragma once

// Umbrella header.

#include "gamorra/baselines.hpp"
#include "gamorra/bench.hpp"
#include "gamorra/error.hpp"
#include "gamorra/experiment.hpp"
#include "gamorra/il.hpp"
#include "gamorra/linalg.hpp"
#include "gamorra/metrics.hpp"
#include "gamorra/mlr.hpp"
#include "gamorra/perf_model.hpp"
#include "gamorra/sim.hpp"
#include "gamorra/stage.hpp"
#include "gamorra/trace.hpp"
#include "gamorra/trainer.hpp"
#include "gamorra/workload.hpp"
