#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bevloop::scene {

// Headings are degrees in [-180, 180). All coordinates are meters in the
// scene frame; forged scenes put the ego start at the origin heading 0.
float wrap_heading(float deg);

struct Pose2 {
    float x = 0.0f;
    float y = 0.0f;
    float heading_deg = 0.0f;
};

struct Trajectory {
    std::vector<Pose2> poses;
    float dt = 0.5f;

    size_t steps() const { return poses.size(); }
    float duration() const { return poses.empty() ? 0.0f : dt * float(poses.size() - 1); }
};

enum class ObjectClass { vehicle, pedestrian, cyclist, barrier };
const char* to_string(ObjectClass c);
ObjectClass object_class_from_string(const std::string& s);

struct ObjectBox {
    uint32_t instance_id = 0;
    ObjectClass cls = ObjectClass::vehicle;
    float length = 4.5f;  // along heading
    float width = 2.0f;
    std::string dense_caption;
    Trajectory traj;  // same dt and step count as the scene ego
};

enum class MapClass { lane_center, lane_edge, crossing };
const char* to_string(MapClass c);
MapClass map_class_from_string(const std::string& s);

struct MapLayer {
    MapClass cls = MapClass::lane_center;
    std::vector<std::vector<Pose2>> polylines;  // heading unused, x/y only
};

enum class Weather { clear, rain };
enum class TimeOfDay { day, night };
enum class Density { sparse, dense };
const char* to_string(Weather w);
const char* to_string(TimeOfDay t);
const char* to_string(Density d);
Weather weather_from_string(const std::string& s);
TimeOfDay time_of_day_from_string(const std::string& s);
Density density_from_string(const std::string& s);

struct SceneTags {
    Weather weather = Weather::clear;
    TimeOfDay time_of_day = TimeOfDay::day;
    Density density = Density::sparse;
};

// Multi-view semantic raster, layout (n_views, n_frames, channels, h, w).
// Channels of a rendered scene: 0 = foreground occupancy, 1 = road
// polylines, 2 = ambient (lighting / weather texture). Planner overlays
// append further channels.
struct SceneRaster {
    int n_views = 0;
    int n_frames = 0;
    int channels = 0;
    int h = 0;
    int w = 0;
    std::vector<float> values;

    size_t size() const {
        return size_t(n_views) * n_frames * channels * h * w;
    }
    float& at(int v, int t, int c, int y, int x) {
        return values[(((size_t(v) * n_frames + t) * channels + c) * h + y) * w + x];
    }
    float at(int v, int t, int c, int y, int x) const {
        return values[(((size_t(v) * n_frames + t) * channels + c) * h + y) * w + x];
    }
    static SceneRaster zeros(int v, int t, int c, int h, int w);
};

struct BevScene {
    std::string id;
    Trajectory ego;
    std::vector<ObjectBox> objects;
    std::vector<MapLayer> map;
    std::string caption;
    std::vector<std::string> keywords;
    SceneTags tags;
    std::string archetype;
    float target_speed = 7.0f;  // expert cruise speed, m/s
    // Generated scenes carry the sampled raster; forged scenes render on
    // demand and leave this empty.
    std::optional<SceneRaster> raster;
};

struct Dataset {
    std::string name;
    std::string provenance;  // forged | generated | retrieved | mixed
    std::vector<BevScene> scenes;

    size_t size() const { return scenes.size(); }
    const BevScene* find(const std::string& id) const;
};

// Yaw-sector views: view v looks along ego heading + yaw_offset_deg[v] and
// covers fov_deg of azimuth out to h * meters_per_px of range. The raster
// window is the axis-aligned h x w patch in the rotated view frame; it
// contains the whole frustum for the default geometry.
struct ViewConfig {
    int n_views = 6;
    float fov_deg = 50.0f;
    std::vector<float> yaw_offsets_deg = {0.0f, 60.0f, 120.0f, 180.0f, 240.0f, 300.0f};
    int h = 32;
    int w = 32;
    float meters_per_px = 1.0f;
    int t_frames = 16;

    float range_m() const { return float(h) * meters_per_px; }
    void validate() const;
    static ViewConfig front_arc(int n_views, float fov_deg, int h, int w, float mpp,
                                int t_frames);
};

// Footprint inflation radius used by every collision predicate: objects are
// approximated by the inscribed circle of their box.
float inflation_radius(float length, float width);
inline constexpr float kEgoLength = 4.5f;
inline constexpr float kEgoWidth = 2.0f;

// Center distance minus both inflation radii; collision predicates compare
// this against the safety threshold.
float effective_distance(const Pose2& ego, const Pose2& other, float other_len,
                         float other_width);

}  // namespace bevloop::scene
