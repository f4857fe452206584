#include "bevloop/planner/overlay.hpp"

#include "bevloop/common/error.hpp"

namespace bevloop::planner {

using scene::Plane;
using scene::SceneRaster;

SceneRaster overlay_outputs(const SceneRaster& base, const scene::BevScene& bev,
                            const scene::ViewConfig& cfg, const PlannerOutput& out) {
    if (base.n_views != cfg.n_views || base.h != cfg.h || base.w != cfg.w)
        throw InvalidArgument("overlay_outputs: raster does not match view config");
    if (base.channels < 3) throw InvalidArgument("overlay_outputs: raster lacks base channels");

    SceneRaster result = SceneRaster::zeros(base.n_views, base.n_frames, 6, base.h, base.w);
    for (int v = 0; v < base.n_views; ++v)
        for (int t = 0; t < base.n_frames; ++t)
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < base.h; ++y)
                    for (int x = 0; x < base.w; ++x)
                        result.at(v, t, c, y, x) = base.at(v, t, c, y, x);

    for (int v = 0; v < base.n_views; ++v) {
        for (int t = 0; t < base.n_frames; ++t) {
            const scene::ViewXform xf =
                scene::make_view_xform(bev.ego.poses[t], cfg.yaw_offsets_deg[v]);
            if (out.plan.poses.size() >= 2) {
                Plane plan_plane = plane_of(result, v, t, kOverlayPlan);
                draw_polyline(plan_plane, cfg, xf, out.plan.poses, 1.0f);
            }
            for (const auto& det : out.detections) {
                if (!det.detected) continue;
                if (det.predicted.poses.size() >= 2) {
                    Plane pred_plane = plane_of(result, v, t, kOverlayPredictions);
                    draw_polyline(pred_plane, cfg, xf, det.predicted.poses, 1.0f);
                }
                if (size_t(t) < det.predicted.poses.size()) {
                    Plane det_plane = plane_of(result, v, t, kOverlayDetections);
                    fill_box(det_plane, cfg, xf, det.predicted.poses[t], det.length, det.width,
                             1.0f);
                }
            }
        }
    }
    return result;
}

}  // namespace bevloop::planner
