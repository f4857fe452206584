#include "bevloop/taxonomy/failures.hpp"

#include "bevloop/common/error.hpp"

namespace bevloop::taxonomy {

using planner::CollisionHit;
using planner::PlannerOutput;
using scene::SceneRaster;

std::vector<FailureRecord> detect_failures(const planner::PlannerModel& model,
                                           const scene::Dataset& dataset,
                                           const scene::ViewConfig& cfg,
                                           const DetectOptions& opts) {
    if (opts.t_e2e_steps <= 0) throw InvalidArgument("detect_failures: t_e2e_steps must be positive");
    if (opts.eps < 0.0f) throw InvalidArgument("detect_failures: negative eps");

    std::vector<FailureRecord> out;
    for (const auto& bev : dataset.scenes) {
        const SceneRaster raster =
            bev.raster ? *bev.raster : scene::render_raster(bev, cfg, opts.render_seed);
        PlannerOutput planned = planner::plan_scene(
            model, bev, raster, cfg, opts.exclude_self ? bev.id : std::string());
        const CollisionHit hit =
            planner::earliest_collision(planned.plan, bev.objects, opts.eps, opts.t_e2e_steps);
        if (hit.step < 0) continue;

        FailureRecord rec;
        rec.scene_id = bev.id;
        rec.collision_step = hit.step;
        rec.collision_time_s = float(hit.step) * planned.plan.dt;
        const auto& collider = bev.objects[size_t(hit.object_index)];
        rec.collider_id = collider.instance_id;
        rec.collider_cls = collider.cls;
        for (const auto& det : planned.detections)
            if (det.instance_id == collider.instance_id) rec.collider_detected = det.detected;
        rec.plan = planned.plan;
        if (opts.with_overlay)
            rec.overlay = planner::overlay_outputs(raster, bev, cfg, planned);
        rec.tags = bev.tags;
        rec.archetype = bev.archetype;
        rec.scene_keywords = bev.keywords;
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace bevloop::taxonomy
