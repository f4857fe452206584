#pragma once

#include "bevloop/planner/planner.hpp"
#include "bevloop/scene/raster.hpp"

namespace bevloop::planner {

// Overlay channel indices appended after the three base channels.
inline constexpr int kOverlayPlan = 3;
inline constexpr int kOverlayPredictions = 4;
inline constexpr int kOverlayDetections = 5;

// Burns the planner output into three extra channels: the planned path,
// the predicted object trajectories, and the detected-object footprints.
// Overlay channels are rewritten from scratch, so applying the same output
// twice yields the same raster; an empty output leaves them zero.
scene::SceneRaster overlay_outputs(const scene::SceneRaster& base, const scene::BevScene& bev,
                                   const scene::ViewConfig& cfg, const PlannerOutput& out);

}  // namespace bevloop::planner
