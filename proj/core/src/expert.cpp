#include "bevloop/forge/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bevloop/common/error.hpp"

namespace bevloop::forge {

using scene::ObjectBox;
using scene::Pose2;

LanePath::LanePath(const std::vector<Pose2>& points) : pts_(points) {
    if (pts_.size() < 2) throw InvalidArgument("LanePath: need at least 2 points");
    cum_.resize(pts_.size(), 0.0f);
    for (size_t i = 1; i < pts_.size(); ++i) {
        const float dx = pts_[i].x - pts_[i - 1].x;
        const float dy = pts_[i].y - pts_[i - 1].y;
        cum_[i] = cum_[i - 1] + std::sqrt(dx * dx + dy * dy);
    }
    total_ = cum_.back();
}

Pose2 LanePath::at(float s) const {
    s = std::clamp(s, 0.0f, total_);
    size_t i = 1;
    while (i + 1 < pts_.size() && cum_[i] < s) ++i;
    const float seg = cum_[i] - cum_[i - 1];
    const float f = seg > 0.0f ? (s - cum_[i - 1]) / seg : 0.0f;
    Pose2 p;
    p.x = pts_[i - 1].x + f * (pts_[i].x - pts_[i - 1].x);
    p.y = pts_[i - 1].y + f * (pts_[i].y - pts_[i - 1].y);
    p.heading_deg = scene::wrap_heading(
        std::atan2(pts_[i].y - pts_[i - 1].y, pts_[i].x - pts_[i - 1].x) * 180.0f / float(M_PI));
    return p;
}

namespace {

// Object pose at continuous time, linear interpolation between stored steps,
// clamped to the trajectory ends.
Pose2 object_at(const ObjectBox& obj, float t, float dt) {
    const auto& poses = obj.traj.poses;
    const float idx = t / dt;
    if (idx <= 0.0f) return poses.front();
    if (idx >= float(poses.size() - 1)) return poses.back();
    const size_t i = size_t(idx);
    const float f = idx - float(i);
    Pose2 p;
    p.x = poses[i].x + f * (poses[i + 1].x - poses[i].x);
    p.y = poses[i].y + f * (poses[i + 1].y - poses[i].y);
    p.heading_deg = poses[i].heading_deg;
    return p;
}

}  // namespace

float predict_ttc(const std::vector<ObjectBox>& objects, const LanePath& path, float s0,
                  float speed, float t_now, float dt, float lookahead_s, float eps) {
    constexpr float kInf = std::numeric_limits<float>::infinity();
    if (objects.empty()) return kInf;
    const float grid = dt / 4.0f;
    const int n = int(std::ceil(lookahead_s / grid));
    for (int k = 0; k <= n; ++k) {
        const float tau = float(k) * grid;
        const Pose2 ego = path.at(s0 + speed * tau);
        for (const auto& obj : objects) {
            const Pose2 op = object_at(obj, t_now + tau, dt);
            if (scene::effective_distance(ego, op, obj.length, obj.width) < eps) return tau;
        }
    }
    return kInf;
}

scene::Trajectory expert_policy(const std::vector<ObjectBox>& objects,
                                const std::vector<scene::MapLayer>& map, float target_speed,
                                int horizon_steps, float dt, float eps) {
    if (horizon_steps <= 0 || dt <= 0.0f)
        throw InvalidArgument("expert_policy: horizon and dt must be positive");
    if (target_speed < 0.0f) throw InvalidArgument("expert_policy: negative target speed");
    const scene::MapLayer* center = nullptr;
    for (const auto& layer : map)
        if (layer.cls == scene::MapClass::lane_center) center = &layer;
    if (!center || center->polylines.empty())
        throw InvalidArgument("expert_policy: no lane_center layer");
    LanePath path(center->polylines.front());

    const float pred_eps = eps + kExpertMargin;
    const float lookahead = float(horizon_steps) * dt;

    scene::Trajectory traj;
    traj.dt = dt;
    traj.poses.reserve(size_t(horizon_steps) + 1);

    float s = 0.0f;
    float v = target_speed;
    bool braking = false;
    traj.poses.push_back(path.at(s));
    for (int step = 1; step <= horizon_steps; ++step) {
        const float t_now = float(step - 1) * dt;
        const float ttc = predict_ttc(objects, path, s, v, t_now, dt, lookahead, pred_eps);
        const float release = braking ? kTtcBrake + kTtcHysteresis : kTtcBrake;
        if (ttc < release) {
            v = std::max(0.0f, v - kExpertDecel * dt);
            braking = true;
        } else {
            if (braking && ttc >= kTtcBrake + kTtcHysteresis) braking = false;
            if (!braking) v = std::min(target_speed, v + kExpertAccel * dt);
        }
        s += v * dt;
        traj.poses.push_back(path.at(s));
    }
    return traj;
}

}  // namespace bevloop::forge
