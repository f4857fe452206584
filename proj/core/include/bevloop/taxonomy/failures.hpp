#pragma once

#include <string>
#include <vector>

#include "bevloop/planner/metrics.hpp"
#include "bevloop/planner/overlay.hpp"
#include "bevloop/planner/planner.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::taxonomy {

struct FailureRecord {
    std::string scene_id;
    int collision_step = -1;       // timestep index of the earliest violation
    float collision_time_s = 0.0f;
    uint32_t collider_id = 0;
    scene::ObjectClass collider_cls = scene::ObjectClass::vehicle;
    bool collider_detected = false;
    scene::Trajectory plan;
    scene::SceneRaster overlay;    // base render + planner overlay channels
    // Scene snapshot for downstream analysis.
    scene::SceneTags tags;
    std::string archetype;
    std::vector<std::string> scene_keywords;
};

struct DetectOptions {
    float eps = 0.5f;
    int t_e2e_steps = 6;
    uint64_t render_seed = 0;
    // Leave-one-out planning: exclude each scene's own bank entry. Needed
    // when mining a planner's own training split, where memorized entries
    // would otherwise hide every failure.
    bool exclude_self = false;
    bool with_overlay = true;
};

// Earliest-violation scan per scene; a record is emitted for scenes where
// the planned trajectory gets an effective distance below eps to any
// replayed object at some step t <= t_e2e_steps. The earliest (step,
// object) pair is recorded, object order breaking ties.
std::vector<FailureRecord> detect_failures(const planner::PlannerModel& model,
                                           const scene::Dataset& dataset,
                                           const scene::ViewConfig& cfg,
                                           const DetectOptions& opts);

}  // namespace bevloop::taxonomy
