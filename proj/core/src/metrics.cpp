#include "bevloop/planner/metrics.hpp"

#include <cmath>

#include "bevloop/common/error.hpp"

namespace bevloop::planner {

using scene::ObjectBox;
using scene::Pose2;
using scene::Trajectory;

HorizonValues l2_error(const Trajectory& plan, const Trajectory& expert,
                       const std::vector<float>& horizons_s) {
    if (plan.dt != expert.dt) throw InvalidArgument("l2_error: dt mismatch");
    HorizonValues out;
    out.horizons_s = horizons_s;
    for (float h : horizons_s) {
        const int steps = int(std::lround(h / plan.dt));
        if (steps < 1 || size_t(steps) >= plan.poses.size() ||
            size_t(steps) >= expert.poses.size())
            throw InvalidArgument("l2_error: horizon exceeds trajectory length");
        double sum = 0.0;
        for (int t = 1; t <= steps; ++t) {
            const double dx = double(plan.poses[t].x) - double(expert.poses[t].x);
            const double dy = double(plan.poses[t].y) - double(expert.poses[t].y);
            sum += std::sqrt(dx * dx + dy * dy);
        }
        out.values.push_back(sum / double(steps));
    }
    double avg = 0.0;
    for (double v : out.values) avg += v;
    out.avg = out.values.empty() ? 0.0 : avg / double(out.values.size());
    return out;
}

CollisionHit earliest_collision(const Trajectory& plan, const std::vector<ObjectBox>& objects,
                                float eps, int t_e2e_steps) {
    CollisionHit hit;
    const int t_max = std::min<int>(t_e2e_steps, int(plan.poses.size()) - 1);
    for (int t = 1; t <= t_max; ++t) {
        for (size_t j = 0; j < objects.size(); ++j) {
            const auto& poses = objects[j].traj.poses;
            const Pose2& op = size_t(t) < poses.size() ? poses[t] : poses.back();
            if (scene::effective_distance(plan.poses[t], op, objects[j].length,
                                          objects[j].width) < eps) {
                hit.step = t;
                hit.object_index = int(j);
                return hit;
            }
        }
    }
    return hit;
}

EvalResult evaluate_planner(const PlannerModel& model, const scene::Dataset& dataset,
                            const scene::ViewConfig& cfg, float eps, int t_e2e_steps,
                            const std::vector<float>& horizons_s, uint64_t render_seed,
                            bool exclude_self) {
    if (dataset.scenes.empty()) throw InvalidArgument("evaluate_planner: empty dataset");
    EvalResult res;
    res.n_scenes = dataset.scenes.size();
    res.l2.horizons_s = horizons_s;
    res.l2.values.assign(horizons_s.size(), 0.0);
    res.collision_rate.horizons_s = horizons_s;
    res.collision_rate.values.assign(horizons_s.size(), 0.0);
    res.hit_rate.horizons_s = horizons_s;
    res.hit_rate.values.assign(horizons_s.size(), 0.0);

    for (const auto& bev : dataset.scenes) {
        const scene::SceneRaster raster =
            bev.raster ? *bev.raster : scene::render_raster(bev, cfg, render_seed);
        const float speed = KnnPlanner::initial_speed(bev.ego);
        const Trajectory plan =
            model.plan(raster, speed, exclude_self ? bev.id : std::string());

        const auto l2 = l2_error(plan, bev.ego, horizons_s);
        for (size_t i = 0; i < horizons_s.size(); ++i) res.l2.values[i] += l2.values[i];

        const CollisionHit hit = earliest_collision(plan, bev.objects, eps, t_e2e_steps);
        if (hit.step >= 0) ++res.n_failures;
        for (size_t i = 0; i < horizons_s.size(); ++i) {
            const int steps = int(std::lround(horizons_s[i] / plan.dt));
            if (hit.step >= 1 && hit.step <= steps) res.collision_rate.values[i] += 1.0;
            const double dx = double(plan.poses[steps].x) - double(bev.ego.poses[steps].x);
            const double dy = double(plan.poses[steps].y) - double(bev.ego.poses[steps].y);
            if (std::sqrt(dx * dx + dy * dy) <= double(kHitRadius))
                res.hit_rate.values[i] += 1.0;
        }
    }

    const double n = double(res.n_scenes);
    for (size_t i = 0; i < horizons_s.size(); ++i) {
        res.l2.values[i] /= n;
        res.collision_rate.values[i] /= n;
        res.hit_rate.values[i] /= n;
    }
    auto finish = [](HorizonValues& hv) {
        double a = 0.0;
        for (double v : hv.values) a += v;
        hv.avg = hv.values.empty() ? 0.0 : a / double(hv.values.size());
    };
    finish(res.l2);
    finish(res.collision_rate);
    finish(res.hit_rate);
    return res;
}

}  // namespace bevloop::planner
