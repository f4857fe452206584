#pragma once

#include <cstdint>
#include <vector>

#include "bevloop/planner/planner.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::planner {

// 3.5 m diameter: a planned point counts as a hit when it lands within half
// a lane width of the expert point at that horizon.
inline constexpr float kHitRadius = 1.75f;

struct HorizonValues {
    std::vector<float> horizons_s;  // e.g. {1, 2, 3}
    std::vector<double> values;     // one per horizon
    double avg = 0.0;               // mean of the per-horizon values
};

// Mean Euclidean plan-vs-expert distance over the timesteps in (0, h].
HorizonValues l2_error(const scene::Trajectory& plan, const scene::Trajectory& expert,
                       const std::vector<float>& horizons_s);

// Earliest step index t in [1, t_e2e] where the effective distance from the
// planned ego pose to any replayed object drops below eps; -1 when clear.
// Object order decides ties at the same step.
struct CollisionHit {
    int step = -1;
    int object_index = -1;
};
CollisionHit earliest_collision(const scene::Trajectory& plan,
                                const std::vector<scene::ObjectBox>& objects, float eps,
                                int t_e2e_steps);

struct EvalResult {
    HorizonValues l2;             // averaged over scenes
    HorizonValues collision_rate; // fraction of scenes violating by each horizon
    HorizonValues hit_rate;       // fraction of scenes within kHitRadius at each horizon
    size_t n_scenes = 0;
    size_t n_failures = 0;        // scenes with any violation within t_e2e
};

// Plans every scene with the model and scores against the expert ego
// trajectories. exclude_self enables leave-one-out planning for datasets
// the model was trained on.
EvalResult evaluate_planner(const PlannerModel& model, const scene::Dataset& dataset,
                            const scene::ViewConfig& cfg, float eps, int t_e2e_steps,
                            const std::vector<float>& horizons_s, uint64_t render_seed,
                            bool exclude_self);

}  // namespace bevloop::planner
