#pragma once

#include "vlad/errors.hpp"
#include "vlad/external_oracle.hpp"
#include "vlad/metrics/latency.hpp"
#include "vlad/metrics/plan_metrics.hpp"
#include "vlad/metrics/text_metrics.hpp"
#include "vlad/oracle.hpp"
#include "vlad/pipeline.hpp"
#include "vlad/planner.hpp"
#include "vlad/planner_train.hpp"
#include "vlad/qa.hpp"
#include "vlad/report.hpp"
#include "vlad/rng.hpp"
#include "vlad/scene.hpp"
#include "vlad/scene_io.hpp"
#include "vlad/simgen.hpp"
