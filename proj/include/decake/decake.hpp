#pragma once

#include "decake/brush_paths.hpp"
#include "decake/config.hpp"
#include "decake/error.hpp"
#include "decake/export.hpp"
#include "decake/force_control.hpp"
#include "decake/geometry.hpp"
#include "decake/orchestrator.hpp"
#include "decake/perception.hpp"
#include "decake/planner.hpp"
#include "decake/primitives.hpp"
#include "decake/random.hpp"
#include "decake/report.hpp"
#include "decake/scene.hpp"
#include "decake/scene_io.hpp"
