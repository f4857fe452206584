#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "bevloop/scene/raster.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::planner {

// One perceived object: ground truth passed through a visibility gate. An
// undetected object has no predicted trajectory.
struct Detection {
    uint32_t instance_id = 0;
    scene::ObjectClass cls = scene::ObjectClass::vehicle;
    float length = 0.0f, width = 0.0f;
    bool detected = false;
    scene::Trajectory predicted;  // empty when undetected
};

struct PlannerOutput {
    scene::Trajectory plan;
    std::vector<Detection> detections;
};

// Objects whose mean foreground value over their footprint pixels (best
// view/frame) stays under this are invisible to the detector. Night scenes
// render at kVisibilityNight < threshold, so their objects drop out.
inline constexpr float kDetectVisibility = 0.5f;

std::vector<Detection> run_detector(const scene::BevScene& bev, const scene::SceneRaster& raster,
                                    const scene::ViewConfig& cfg);

class PlannerModel {
  public:
    virtual ~PlannerModel() = default;
    // exclude_scene_id supports leave-one-out evaluation on data the model
    // has memorized; models without stored per-scene entries ignore it.
    virtual scene::Trajectory plan(const scene::SceneRaster& raster, float ego_speed,
                                   const std::string& exclude_scene_id = "") const = 0;
    virtual std::string fingerprint() const = 0;
};

// plan + perception for one scene. The raster must be the scene's base
// render (or stored generated raster).
PlannerOutput plan_scene(const PlannerModel& model, const scene::BevScene& bev,
                         const scene::SceneRaster& raster, const scene::ViewConfig& cfg,
                         const std::string& exclude_scene_id = "");

struct KnnConfig {
    int k = 3;
    int grid = 4;          // coarse pooling grid per channel
    int t_e2e_steps = 6;   // planned steps
    float dt = 0.5f;
    float speed_scale = 0.1f;  // ego speed contribution to the feature vector
};

struct BankEntry {
    std::string scene_id;
    std::vector<float> feature;
    std::vector<std::array<float, 3>> deltas;  // per-step (dx, dy, dheading)
};

// Nearest-neighbor planner: features are channel-wise means over views and
// frames pooled to a coarse grid, plus a scaled ego-speed component; the
// plan is the distance-weighted average of the k nearest stored delta
// sequences. Training inserts non-duplicate entries only (feature digest).
class KnnPlanner : public PlannerModel {
  public:
    KnnPlanner(KnnConfig cfg, scene::ViewConfig views, uint64_t render_seed);

    // Appends one bank entry per scene not already present (by feature
    // digest). Deterministic; re-training with the same data is a no-op.
    void train(const scene::Dataset& dataset);

    scene::Trajectory plan(const scene::SceneRaster& raster, float ego_speed,
                           const std::string& exclude_scene_id = "") const override;
    std::string fingerprint() const override;

    size_t bank_size() const { return bank_.size(); }
    const KnnConfig& knn_config() const { return cfg_; }
    const scene::ViewConfig& view_config() const { return views_; }
    uint64_t render_seed() const { return render_seed_; }
    const std::vector<BankEntry>& bank() const { return bank_; }

    void save(const std::string& path) const;
    static KnnPlanner load(const std::string& path);

    static std::vector<float> pooled_feature(const scene::SceneRaster& raster, int grid,
                                             float ego_speed, float speed_scale);
    static uint64_t feature_digest(const std::vector<float>& feature);

    // Render-or-reuse helper shared by train/eval paths.
    scene::SceneRaster scene_raster(const scene::BevScene& bev) const;
    // Ego speed over the first step of a stored trajectory.
    static float initial_speed(const scene::Trajectory& traj);

  private:
    KnnConfig cfg_;
    scene::ViewConfig views_;
    uint64_t render_seed_ = 0;
    std::vector<BankEntry> bank_;
    std::unordered_set<uint64_t> digests_;
};

}  // namespace bevloop::planner
