#include "bevloop/scene/types.hpp"

#include <algorithm>
#include <cmath>

#include "bevloop/common/error.hpp"

namespace bevloop::scene {

float wrap_heading(float deg) {
    float r = std::fmod(deg + 180.0f, 360.0f);
    if (r < 0.0f) r += 360.0f;
    return r - 180.0f;
}

const char* to_string(ObjectClass c) {
    switch (c) {
        case ObjectClass::vehicle: return "vehicle";
        case ObjectClass::pedestrian: return "pedestrian";
        case ObjectClass::cyclist: return "cyclist";
        case ObjectClass::barrier: return "barrier";
    }
    return "vehicle";
}

ObjectClass object_class_from_string(const std::string& s) {
    if (s == "vehicle") return ObjectClass::vehicle;
    if (s == "pedestrian") return ObjectClass::pedestrian;
    if (s == "cyclist") return ObjectClass::cyclist;
    if (s == "barrier") return ObjectClass::barrier;
    throw InvalidArgument("unknown object class: " + s);
}

const char* to_string(MapClass c) {
    switch (c) {
        case MapClass::lane_center: return "lane_center";
        case MapClass::lane_edge: return "lane_edge";
        case MapClass::crossing: return "crossing";
    }
    return "lane_center";
}

MapClass map_class_from_string(const std::string& s) {
    if (s == "lane_center") return MapClass::lane_center;
    if (s == "lane_edge") return MapClass::lane_edge;
    if (s == "crossing") return MapClass::crossing;
    throw InvalidArgument("unknown map class: " + s);
}

const char* to_string(Weather w) { return w == Weather::clear ? "clear" : "rain"; }
const char* to_string(TimeOfDay t) { return t == TimeOfDay::day ? "day" : "night"; }
const char* to_string(Density d) { return d == Density::sparse ? "sparse" : "dense"; }

Weather weather_from_string(const std::string& s) {
    if (s == "clear") return Weather::clear;
    if (s == "rain") return Weather::rain;
    throw InvalidArgument("unknown weather: " + s);
}

TimeOfDay time_of_day_from_string(const std::string& s) {
    if (s == "day") return TimeOfDay::day;
    if (s == "night") return TimeOfDay::night;
    throw InvalidArgument("unknown time_of_day: " + s);
}

Density density_from_string(const std::string& s) {
    if (s == "sparse") return Density::sparse;
    if (s == "dense") return Density::dense;
    throw InvalidArgument("unknown density: " + s);
}

SceneRaster SceneRaster::zeros(int v, int t, int c, int h, int w) {
    SceneRaster r;
    r.n_views = v;
    r.n_frames = t;
    r.channels = c;
    r.h = h;
    r.w = w;
    r.values.assign(r.size(), 0.0f);
    return r;
}

const BevScene* Dataset::find(const std::string& id) const {
    for (const auto& s : scenes)
        if (s.id == id) return &s;
    return nullptr;
}

void ViewConfig::validate() const {
    if (n_views <= 0) throw InvalidArgument("ViewConfig: n_views must be positive");
    if (int(yaw_offsets_deg.size()) != n_views)
        throw InvalidArgument("ViewConfig: yaw_offsets_deg size must equal n_views");
    if (h <= 0 || w <= 0 || meters_per_px <= 0.0f)
        throw InvalidArgument("ViewConfig: raster geometry must be positive");
    if (t_frames <= 0) throw InvalidArgument("ViewConfig: t_frames must be positive");
    if (fov_deg <= 0.0f || fov_deg > 360.0f)
        throw InvalidArgument("ViewConfig: fov_deg out of range");
}

ViewConfig ViewConfig::front_arc(int n_views, float fov_deg, int h, int w, float mpp,
                                 int t_frames) {
    ViewConfig cfg;
    cfg.n_views = n_views;
    cfg.fov_deg = fov_deg;
    cfg.yaw_offsets_deg.clear();
    // Symmetric arc around the ego heading, 60 degree spacing.
    const float start = -60.0f * float(n_views - 1) / 2.0f;
    for (int v = 0; v < n_views; ++v)
        cfg.yaw_offsets_deg.push_back(wrap_heading(start + 60.0f * float(v)));
    cfg.h = h;
    cfg.w = w;
    cfg.meters_per_px = mpp;
    cfg.t_frames = t_frames;
    return cfg;
}

float inflation_radius(float length, float width) {
    return 0.5f * std::min(length, width);
}

float effective_distance(const Pose2& ego, const Pose2& other, float other_len,
                         float other_width) {
    const float dx = ego.x - other.x;
    const float dy = ego.y - other.y;
    const float center = std::sqrt(dx * dx + dy * dy);
    return center - inflation_radius(kEgoLength, kEgoWidth) -
           inflation_radius(other_len, other_width);
}

}  // namespace bevloop::scene
