#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "bevloop/scene/layout.hpp"
#include "bevloop/scene/raster.hpp"
#include "bevloop/scene/types.hpp"

using namespace bevloop::scene;

namespace {

// Straight-ahead cruise with one box parked in front of the ego.
BevScene simple_scene(int steps, float obj_x, float obj_y) {
    BevScene s;
    s.id = "t";
    s.ego.dt = 0.5f;
    for (int i = 0; i < steps; ++i) s.ego.poses.push_back({0.0f, 0.0f, 0.0f});
    ObjectBox box;
    box.instance_id = 1;
    box.cls = ObjectClass::vehicle;
    box.length = 4.0f;
    box.width = 2.0f;
    for (int i = 0; i < steps; ++i) box.traj.poses.push_back({obj_x, obj_y, 0.0f});
    box.traj.dt = 0.5f;
    s.objects.push_back(box);
    MapLayer lane;
    lane.cls = MapClass::lane_center;
    lane.polylines.push_back({{0.0f, 0.0f}, {30.0f, 0.0f}});
    s.map.push_back(lane);
    return s;
}

}  // namespace

TEST_CASE("a box around a pixel center lights exactly that pixel") {
    const ViewConfig vc = ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    auto raster = SceneRaster::zeros(1, 1, 1, vc.h, vc.w);
    Plane plane = plane_of(raster, 0, 0, 0);
    const ViewXform xf = make_view_xform({0, 0, 0}, 0.0f);
    const auto [fwd, left] = pixel_center(vc, 8, 8);
    // Box sized just under one pixel pitch; only pixel (8, 8) has its
    // center inside.
    fill_box(plane, vc, xf, {fwd, left, 0.0f}, 1.9f, 1.9f, 1.0f);
    int lit = 0;
    for (int r = 0; r < vc.h; ++r)
        for (int c = 0; c < vc.w; ++c)
            if (plane.at(r, c) > 0.0f) {
                ++lit;
                CHECK(r == 8);
                CHECK(c == 8);
            }
    CHECK(lit == 1);
}

TEST_CASE("rendered channels: foreground box, road line, ambient level") {
    const ViewConfig vc = ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    const BevScene s = simple_scene(4, 10.0f, 0.0f);
    const SceneRaster r = render_raster(s, vc, 0);
    CHECK(r.n_views == 1);
    CHECK(r.n_frames == 4);
    CHECK(r.channels == 3);

    float fore_max = 0.0f, road_max = 0.0f;
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) {
            fore_max = std::max(fore_max, r.at(0, 0, 0, y, x));
            road_max = std::max(road_max, r.at(0, 0, 1, y, x));
        }
    CHECK(fore_max == doctest::Approx(kVisibilityDay));
    CHECK(road_max == doctest::Approx(1.0f));
    // Clear day: ambient is a constant full-brightness plane.
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) CHECK(r.at(0, 0, 2, y, x) == doctest::Approx(1.0f));
}

TEST_CASE("night renders foreground below the day level") {
    const ViewConfig vc = ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    BevScene s = simple_scene(4, 10.0f, 0.0f);
    s.tags.time_of_day = TimeOfDay::night;
    const SceneRaster r = render_raster(s, vc, 0);
    float fore_max = 0.0f;
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) fore_max = std::max(fore_max, r.at(0, 0, 0, y, x));
    CHECK(fore_max == doctest::Approx(kVisibilityNight));
    CHECK(kVisibilityNight < kVisibilityDay);
    // Ambient drops too.
    CHECK(r.at(0, 0, 2, 0, 0) == doctest::Approx(0.35f));
}

TEST_CASE("render is deterministic and rain speckle varies per scene id") {
    const ViewConfig vc = ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    BevScene a = simple_scene(4, 10.0f, 0.0f);
    a.tags.weather = Weather::rain;
    const SceneRaster r1 = render_raster(a, vc, 7);
    const SceneRaster r2 = render_raster(a, vc, 7);
    CHECK(r1.values == r2.values);
    BevScene b = a;
    b.id = "other";
    const SceneRaster r3 = render_raster(b, vc, 7);
    CHECK(r1.values != r3.values);
}

TEST_CASE("concat_views tiles six 64-wide views into width 384") {
    ViewConfig vc;
    vc.n_views = 6;
    vc.h = 64;
    vc.w = 64;
    vc.t_frames = 2;
    vc.yaw_offsets_deg = {0, 60, 120, 180, 240, 300};
    SceneRaster r = SceneRaster::zeros(6, 2, 3, 64, 64);
    for (int v = 0; v < 6; ++v) r.at(v, 0, 0, 0, 0) = float(v + 1);
    const SceneRaster tiled = concat_views(r, vc);
    CHECK(tiled.n_views == 1);
    CHECK(tiled.h == 64);
    CHECK(tiled.w == 384);
    const SceneRaster back = split_views(tiled, vc);
    CHECK(back.values == r.values);
}

TEST_CASE("cyclic view order sorts by normalized yaw") {
    ViewConfig vc;
    vc.n_views = 4;
    vc.yaw_offsets_deg = {90.0f, -90.0f, 0.0f, 180.0f};
    vc.t_frames = 1;
    const std::vector<int> order = cyclic_view_order(vc);
    // Normalized yaws: 90, 270, 0, 180 -> indices 2, 0, 3, 1.
    REQUIRE(order.size() == 4);
    CHECK(order[0] == 2);
    CHECK(order[1] == 0);
    CHECK(order[2] == 3);
    CHECK(order[3] == 1);
}

TEST_CASE("project_layout fills real slots first, sentinels the rest") {
    const ViewConfig vc = ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    const BevScene s = simple_scene(4, 10.0f, 0.0f);
    const ProjectedLayout lay = project_layout(s, vc, 4);
    CHECK(lay.n_views == 1);
    CHECK(lay.n_frames == 4);
    CHECK(lay.n_box == 4);

    const BoxSlot& first = lay.at(0, 0, 0);
    REQUIRE(first.valid);
    CHECK(first.b[0] >= 0.0f);
    CHECK(first.b[2] <= 1.0f);
    CHECK(first.b[0] < first.b[2]);
    CHECK(first.b[1] < first.b[3]);
    CHECK(first.token >= 0);

    for (int n = 1; n < 4; ++n) {
        const BoxSlot& pad = lay.at(0, 0, n);
        CHECK_FALSE(pad.valid);
        CHECK(pad.b[0] == doctest::Approx(kSentinel));
        CHECK(pad.heading_deg == doctest::Approx(kSentinel));
        CHECK(pad.id01 == doctest::Approx(kSentinel));
        CHECK(pad.token == -1);
    }
    // Map raster back channel count matches the three map classes.
    CHECK(lay.back.channels == 3);
}

TEST_CASE("objects behind the view frustum project to no slot") {
    const ViewConfig vc = ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    const BevScene s = simple_scene(4, -20.0f, 0.0f);
    const ProjectedLayout lay = project_layout(s, vc, 4);
    for (int n = 0; n < 4; ++n) CHECK_FALSE(lay.at(0, 0, n).valid);
}

TEST_CASE("caption tokens are stable, bounded, and zero padded") {
    const std::vector<int> t1 = caption_tokens("night low_visibility", 8);
    const std::vector<int> t2 = caption_tokens("night low_visibility", 8);
    REQUIRE(t1.size() == 8);
    CHECK(t1 == t2);
    for (int tok : t1) {
        CHECK(tok >= 0);
        CHECK(tok < kCaptionVocab);
    }
    // Two words then padding.
    CHECK(t1[0] != 0);
    CHECK(t1[1] != 0);
    CHECK(t1[2] == 0);
    CHECK(caption_tokens("a b c d e", 3).size() == 3);
}

TEST_CASE("effective distance subtracts both inflation radii") {
    // 4.5 x 2.0 ego -> radius 1.0; a same-size object 5 m ahead leaves 3 m.
    CHECK(inflation_radius(kEgoLength, kEgoWidth) == doctest::Approx(1.0f));
    const float d = effective_distance({0, 0, 0}, {5, 0, 0}, 4.5f, 2.0f);
    CHECK(d == doctest::Approx(3.0f));
}

TEST_CASE("heading wraps into [-180, 180)") {
    CHECK(wrap_heading(180.0f) == doctest::Approx(-180.0f));
    CHECK(wrap_heading(-180.0f) == doctest::Approx(-180.0f));
    CHECK(wrap_heading(360.0f + 30.0f) == doctest::Approx(30.0f));
    CHECK(wrap_heading(-540.0f) == doctest::Approx(-180.0f));
}
