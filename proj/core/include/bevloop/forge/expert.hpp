#pragma once

#include "bevloop/scene/types.hpp"

namespace bevloop::forge {

// Expert driving rule: follow the lane center at the target speed and brake
// at a fixed rate whenever the predicted time-to-collision drops under
// kTtcBrake seconds. Braking releases only above kTtcBrake + kTtcHysteresis
// so the speed command cannot chatter. The prediction replays the known
// object trajectories rather than extrapolating, so with the built-in
// margin the rollout never violates the collision predicate.
inline constexpr float kTtcBrake = 2.0f;
inline constexpr float kTtcHysteresis = 0.2f;
inline constexpr float kExpertDecel = 5.0f;   // m/s^2
inline constexpr float kExpertAccel = 1.5f;   // m/s^2
inline constexpr float kExpertMargin = 0.3f;  // added to eps when predicting

// Arc-length path over the lane-center polyline.
class LanePath {
  public:
    explicit LanePath(const std::vector<scene::Pose2>& points);
    scene::Pose2 at(float arclength) const;
    float length() const { return total_; }

  private:
    std::vector<scene::Pose2> pts_;
    std::vector<float> cum_;
    float total_ = 0.0f;
};

// Earliest predicted time (seconds from now, fine-grained grid) at which the
// ego, moving at constant speed along the path from arclength s0, gets an
// effective distance below eps to any object. Returns +inf when clear.
float predict_ttc(const std::vector<scene::ObjectBox>& objects, const LanePath& path,
                  float s0, float speed, float t_now, float dt, float lookahead_s,
                  float eps);

// Rolls out the expert trajectory for a scene whose objects/map are already
// in place. horizon_steps+1 poses, fixed dt.
scene::Trajectory expert_policy(const std::vector<scene::ObjectBox>& objects,
                                const std::vector<scene::MapLayer>& map,
                                float target_speed, int horizon_steps, float dt,
                                float eps);

}  // namespace bevloop::forge
