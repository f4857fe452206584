#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "bevloop/planner/metrics.hpp"
#include "bevloop/planner/planner.hpp"
#include "bevloop/scene/raster.hpp"
#include "bevloop/scene/types.hpp"
#include "bevloop/taxonomy/failures.hpp"

using namespace bevloop;
using scene::BevScene;
using scene::ObjectBox;
using scene::Pose2;
using scene::Trajectory;

namespace {

Trajectory straight(int steps, float step_m, float y_per_step = 0.0f) {
    Trajectory t;
    t.dt = 0.5f;
    for (int k = 0; k <= steps; ++k)
        t.poses.push_back({step_m * float(k), y_per_step * float(k), 0.0f});
    return t;
}

// Ego cruising down an empty straight road.
BevScene cruise_scene(const std::string& id, int steps, float step_m) {
    BevScene s;
    s.id = id;
    s.ego = straight(steps, step_m);
    scene::MapLayer lane;
    lane.cls = scene::MapClass::lane_center;
    lane.polylines.push_back({{0.0f, 0.0f}, {40.0f, 0.0f}});
    s.map.push_back(lane);
    s.caption = "cruise";
    s.keywords = {"clear"};
    s.archetype = "nominal";
    return s;
}

ObjectBox stalled_vehicle(float x, int steps) {
    ObjectBox box;
    box.instance_id = 9;
    box.cls = scene::ObjectClass::vehicle;
    box.length = 4.5f;
    box.width = 2.0f;
    box.traj.dt = 0.5f;
    for (int k = 0; k <= steps; ++k) box.traj.poses.push_back({x, 0.0f, 0.0f});
    return box;
}

}  // namespace

TEST_CASE("l2 error against hand-computed linear drift") {
    // Offset grows 0.1 m per 0.5 s step. Horizon h covers steps 1..2h:
    // L2@1s = 0.1*(1+2)/2, @2s = 0.1*(1+..+4)/4, @3s = 0.1*(1+..+6)/6.
    const Trajectory expert = straight(6, 1.0f);
    const Trajectory plan = straight(6, 1.0f, 0.1f);
    const auto hv = planner::l2_error(plan, expert, {1.0f, 2.0f, 3.0f});
    REQUIRE(hv.values.size() == 3);
    CHECK(hv.values[0] == doctest::Approx(0.15).epsilon(1e-6));
    CHECK(hv.values[1] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(hv.values[2] == doctest::Approx(0.35).epsilon(1e-6));
    CHECK(hv.avg == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("earliest collision: first violating step and object order ties") {
    // Plan advances 2 m per step toward a stalled car at x = 8. Effective
    // distance at step k is (8 - 2k) - 2; it first drops below 0.5 at k = 3.
    const Trajectory plan = straight(6, 2.0f);
    std::vector<ObjectBox> objs = {stalled_vehicle(8.0f, 6)};
    auto hit = planner::earliest_collision(plan, objs, 0.5f, 6);
    CHECK(hit.step == 3);
    CHECK(hit.object_index == 0);

    // A second object violating at the same step loses the tie to the first.
    objs.push_back(stalled_vehicle(8.0f, 6));
    hit = planner::earliest_collision(plan, objs, 0.5f, 6);
    CHECK(hit.step == 3);
    CHECK(hit.object_index == 0);

    // Clear when the obstacle sits beyond reach within t_e2e.
    const std::vector<ObjectBox> far = {stalled_vehicle(30.0f, 6)};
    hit = planner::earliest_collision(plan, far, 0.5f, 6);
    CHECK(hit.step == -1);

    // Truncating the horizon hides the violation.
    const std::vector<ObjectBox> near = {stalled_vehicle(8.0f, 6)};
    hit = planner::earliest_collision(plan, near, 0.5f, 2);
    CHECK(hit.step == -1);
}

TEST_CASE("knn planner with k=1 memorizes its training scene") {
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    planner::KnnConfig kc;
    kc.k = 1;
    scene::Dataset data;
    data.scenes.push_back(cruise_scene("a", 6, 2.0f));
    planner::KnnPlanner p(kc, vc, 0);
    p.train(data);
    CHECK(p.bank_size() == 1);

    const auto raster = p.scene_raster(data.scenes[0]);
    const float speed = planner::KnnPlanner::initial_speed(data.scenes[0].ego);
    const Trajectory plan = p.plan(raster, speed);
    REQUIRE(plan.poses.size() >= 7);
    for (int k = 0; k <= 6; ++k) {
        CHECK(plan.poses[k].x == doctest::Approx(data.scenes[0].ego.poses[k].x).epsilon(1e-5));
        CHECK(plan.poses[k].y == doctest::Approx(data.scenes[0].ego.poses[k].y).epsilon(1e-5));
    }
}

TEST_CASE("leave-one-out exclusion switches to the other bank entry") {
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    planner::KnnConfig kc;
    kc.k = 1;
    scene::Dataset data;
    data.scenes.push_back(cruise_scene("fast", 6, 3.0f));
    BevScene slow = cruise_scene("slow", 6, 1.0f);
    slow.objects.push_back(stalled_vehicle(12.0f, 6));
    data.scenes.push_back(slow);
    planner::KnnPlanner p(kc, vc, 0);
    p.train(data);
    REQUIRE(p.bank_size() == 2);

    const auto raster = p.scene_raster(slow);
    const float speed = planner::KnnPlanner::initial_speed(slow.ego);
    const Trajectory self = p.plan(raster, speed);
    const Trajectory loo = p.plan(raster, speed, "slow");
    // Memorized: replays its own 1 m steps. Excluded: falls back to the
    // fast scene's 3 m steps.
    CHECK(self.poses[6].x == doctest::Approx(6.0f).epsilon(1e-4));
    CHECK(loo.poses[6].x == doctest::Approx(18.0f).epsilon(1e-4));
}

TEST_CASE("retraining on the same dataset is a no-op (digest dedup)") {
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    scene::Dataset data;
    data.scenes.push_back(cruise_scene("a", 6, 2.0f));
    data.scenes.push_back(cruise_scene("b", 6, 2.5f));
    planner::KnnPlanner p(planner::KnnConfig{}, vc, 0);
    p.train(data);
    const size_t n = p.bank_size();
    p.train(data);
    CHECK(p.bank_size() == n);

    // A verbatim copy under a new id carries the same rendered feature and
    // is dropped too; same-geometry scenes dedupe to one entry.
    scene::Dataset copy;
    copy.scenes.push_back(data.scenes[0]);
    copy.scenes[0].id = "a_copy";
    p.train(copy);
    CHECK(p.bank_size() == n);
}

TEST_CASE("detector sees day objects and misses night objects") {
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    BevScene day = cruise_scene("day", 6, 2.0f);
    day.objects.push_back(stalled_vehicle(10.0f, 6));
    const auto day_raster = scene::render_raster(day, vc, 0);
    const auto day_dets = planner::run_detector(day, day_raster, vc);
    REQUIRE(day_dets.size() == 1);
    CHECK(day_dets[0].detected);
    CHECK_FALSE(day_dets[0].predicted.poses.empty());

    BevScene night = day;
    night.id = "night";
    night.tags.time_of_day = scene::TimeOfDay::night;
    const auto night_raster = scene::render_raster(night, vc, 0);
    const auto night_dets = planner::run_detector(night, night_raster, vc);
    REQUIRE(night_dets.size() == 1);
    CHECK_FALSE(night_dets[0].detected);
    CHECK(night_dets[0].predicted.poses.empty());
}

TEST_CASE("failure mining reports step, collider, and detectability") {
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    // Bank holds only a cruise exemplar, so the planner drives into the
    // stalled car of the probe scene.
    scene::Dataset train;
    train.scenes.push_back(cruise_scene("cruise", 6, 2.0f));
    planner::KnnPlanner p(planner::KnnConfig{}, vc, 0);
    p.train(train);

    scene::Dataset probe;
    BevScene blocked = cruise_scene("blocked", 6, 2.0f);
    blocked.ego = straight(6, 0.5f);  // expert slows; planner won't
    blocked.objects.push_back(stalled_vehicle(8.0f, 6));
    probe.scenes.push_back(blocked);

    taxonomy::DetectOptions opts;
    opts.with_overlay = false;
    const auto fails = taxonomy::detect_failures(p, probe, vc, opts);
    REQUIRE(fails.size() == 1);
    CHECK(fails[0].scene_id == "blocked");
    CHECK(fails[0].collision_step == 3);
    CHECK(fails[0].collision_time_s == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(fails[0].collider_id == 9);
    CHECK(fails[0].collider_cls == scene::ObjectClass::vehicle);
    CHECK(fails[0].collider_detected);

    // The same probe at night fails with an undetected collider.
    probe.scenes[0].id = "blocked_night";
    probe.scenes[0].tags.time_of_day = scene::TimeOfDay::night;
    const auto night_fails = taxonomy::detect_failures(p, probe, vc, opts);
    REQUIRE(night_fails.size() == 1);
    CHECK_FALSE(night_fails[0].collider_detected);
}

TEST_CASE("evaluation aggregates failures and hit rates over a dataset") {
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    scene::Dataset train;
    train.scenes.push_back(cruise_scene("cruise", 6, 2.0f));
    planner::KnnPlanner p(planner::KnnConfig{}, vc, 0);
    p.train(train);

    scene::Dataset val;
    val.scenes.push_back(cruise_scene("same", 6, 2.0f));  // matches the bank
    BevScene blocked = cruise_scene("hard", 6, 2.0f);
    blocked.ego = straight(6, 0.5f);
    blocked.objects.push_back(stalled_vehicle(8.0f, 6));
    val.scenes.push_back(blocked);

    const auto res = planner::evaluate_planner(p, val, vc, 0.5f, 6, {1.0f, 2.0f, 3.0f}, 0, false);
    CHECK(res.n_scenes == 2);
    CHECK(res.n_failures == 1);
    REQUIRE(res.l2.values.size() == 3);
    // The matching scene replays exactly; the blocked scene contributes
    // (2.0 - 0.5) * k m of overshoot at step k.
    CHECK(res.l2.values[0] == doctest::Approx((1.5 * (1 + 2) / 2.0) / 2.0).epsilon(1e-5));
}

TEST_CASE("planner save/load round trips the bank and config") {
    namespace fs = std::filesystem;
    const scene::ViewConfig vc = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 7);
    scene::Dataset data;
    data.scenes.push_back(cruise_scene("a", 6, 2.0f));
    data.scenes.push_back(cruise_scene("b", 6, 2.5f));
    planner::KnnPlanner p(planner::KnnConfig{}, vc, 33);
    p.train(data);

    const fs::path path = fs::temp_directory_path() / "bevloop_planner_bank.json";
    p.save(path.string());
    const planner::KnnPlanner q = planner::KnnPlanner::load(path.string());
    CHECK(q.bank_size() == p.bank_size());
    CHECK(q.render_seed() == 33);
    CHECK(q.fingerprint() == p.fingerprint());
    const auto raster = p.scene_raster(data.scenes[0]);
    const float speed = planner::KnnPlanner::initial_speed(data.scenes[0].ego);
    const auto plan_p = p.plan(raster, speed);
    const auto plan_q = q.plan(raster, speed);
    REQUIRE(plan_p.poses.size() == plan_q.poses.size());
    for (size_t i = 0; i < plan_p.poses.size(); ++i)
        CHECK(plan_p.poses[i].x == doctest::Approx(plan_q.poses[i].x));
    fs::remove(path);
}
