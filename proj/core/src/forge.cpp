#include "bevloop/forge/forge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"
#include "bevloop/forge/expert.hpp"

namespace bevloop::forge {

using scene::BevScene;
using scene::Density;
using scene::MapClass;
using scene::MapLayer;
using scene::ObjectBox;
using scene::ObjectClass;
using scene::Pose2;
using scene::TimeOfDay;
using scene::Trajectory;
using scene::Weather;

namespace {

constexpr float kLaneHalfWidth = 1.75f;
constexpr float kAdjacentLaneY = 3.5f;

std::vector<Pose2> line(float x0, float y0, float x1, float y1, float step = 10.0f) {
    std::vector<Pose2> pts;
    const float len = std::hypot(x1 - x0, y1 - y0);
    const int n = std::max(1, int(std::ceil(len / step)));
    for (int i = 0; i <= n; ++i) {
        const float f = float(i) / float(n);
        pts.push_back(Pose2{x0 + f * (x1 - x0), y0 + f * (y1 - y0), 0.0f});
    }
    return pts;
}

std::vector<MapLayer> straight_road(float x_end, bool dual_lane, float crossing_x) {
    std::vector<MapLayer> map;
    MapLayer center{MapClass::lane_center, {line(-10.0f, 0.0f, x_end, 0.0f)}};
    if (dual_lane)
        center.polylines.push_back(line(-10.0f, kAdjacentLaneY, x_end, kAdjacentLaneY));
    map.push_back(center);
    MapLayer edges{MapClass::lane_edge, {}};
    edges.polylines.push_back(line(-10.0f, -kLaneHalfWidth, x_end, -kLaneHalfWidth));
    const float top = dual_lane ? kAdjacentLaneY + kLaneHalfWidth : kLaneHalfWidth;
    edges.polylines.push_back(line(-10.0f, top, x_end, top));
    map.push_back(edges);
    if (crossing_x > 0.0f) {
        MapLayer cross{MapClass::crossing, {line(crossing_x, -6.0f, crossing_x, 6.0f, 2.0f)}};
        map.push_back(cross);
    }
    return map;
}

// Constant-velocity trajectory.
Trajectory drive(float x0, float y0, float vx, float vy, float heading, int steps, float dt) {
    Trajectory t;
    t.dt = dt;
    for (int k = 0; k <= steps; ++k)
        t.poses.push_back(Pose2{x0 + vx * float(k) * dt, y0 + vy * float(k) * dt, heading});
    return t;
}

// Drives along +x at speed vx, merging from y0 to y=0 between t_cut and
// t_cut + merge_s.
Trajectory cut_in_drive(float x0, float y0, float vx, float t_cut, float merge_s, int steps,
                        float dt) {
    Trajectory t;
    t.dt = dt;
    for (int k = 0; k <= steps; ++k) {
        const float tk = float(k) * dt;
        float f = (tk - t_cut) / merge_s;
        f = std::clamp(f, 0.0f, 1.0f);
        const float y = y0 * (1.0f - f);
        const float heading = f > 0.0f && f < 1.0f
                                  ? scene::wrap_heading(std::atan2(-y0 / merge_s, vx) * 180.0f /
                                                        float(M_PI))
                                  : 0.0f;
        t.poses.push_back(Pose2{x0 + vx * tk, y, heading});
    }
    return t;
}

ObjectBox make_object(uint32_t id, ObjectClass cls, float length, float width,
                      const std::string& caption, Trajectory traj) {
    ObjectBox o;
    o.instance_id = id;
    o.cls = cls;
    o.length = length;
    o.width = width;
    o.dense_caption = caption;
    o.traj = std::move(traj);
    return o;
}

void add_parked_clutter(BevScene& s, Rng& rng, int max_count, int steps, float dt,
                        uint32_t& next_id) {
    const int n = int(rng.uniform_int(0, max_count));
    for (int i = 0; i < n; ++i) {
        const float side = rng.flip(0.5) ? 1.0f : -1.0f;
        const float x = float(rng.uniform(8.0, 34.0));
        s.objects.push_back(make_object(next_id++, ObjectClass::vehicle, 4.5f, 2.0f,
                                        "parked car at the roadside",
                                        drive(x, side * 5.2f, 0.0f, 0.0f, 0.0f, steps, dt)));
    }
}

struct SceneBits {
    std::vector<std::string> keywords;
    std::string phrase;
};

}  // namespace

ForgeSpec ForgeSpec::from_config(const Config& cfg, const std::string& section) {
    ForgeSpec spec;
    spec.name = cfg.get_or(section, "name", "forged");
    spec.n_scenes = int(cfg.get_int(section, "n_scenes"));
    spec.mixture = cfg.get_weighted_list(section, "mixture");
    spec.seed = uint64_t(cfg.get_int_or(section, "seed", 0));
    spec.horizon_steps = int(cfg.get_int_or(section, "horizon_steps", 16));
    spec.dt = float(cfg.get_real_or(section, "dt", 0.5));
    spec.speed_min = float(cfg.get_real_or(section, "speed_min", 5.5));
    spec.speed_max = float(cfg.get_real_or(section, "speed_max", 8.0));
    spec.eps = float(cfg.get_real_or(section, "eps", 0.5));
    return spec;
}

std::vector<std::string> archetype_names() {
    return {"nominal", "night_low_visibility", "dense_cut_in", "pedestrian_crossing",
            "rain_slow_traffic"};
}

std::vector<int> allocate_counts(const std::vector<std::pair<std::string, double>>& mixture,
                                 int n_scenes) {
    if (mixture.empty()) throw InvalidArgument("forge: empty mixture");
    double total = 0.0;
    for (const auto& [name, w] : mixture) {
        if (w < 0.0) throw InvalidArgument("forge: negative mixture weight for " + name);
        total += w;
    }
    if (total <= 0.0) throw InvalidArgument("forge: mixture weights sum to zero");

    std::vector<int> counts(mixture.size(), 0);
    std::vector<std::pair<double, size_t>> remainders;
    int assigned = 0;
    for (size_t i = 0; i < mixture.size(); ++i) {
        const double exact = double(n_scenes) * mixture[i].second / total;
        counts[i] = int(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < n_scenes - assigned; ++k) counts[remainders[k].second] += 1;
    return counts;
}

scene::Dataset forge_dataset(const ForgeSpec& spec) {
    if (spec.n_scenes <= 0) throw InvalidArgument("forge: n_scenes must be positive");
    const auto known = archetype_names();
    for (const auto& [name, w] : spec.mixture) {
        (void)w;
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            std::string list;
            for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
            throw InvalidArgument("forge: unknown archetype '" + name + "' (known: " + list + ")");
        }
    }
    const auto counts = allocate_counts(spec.mixture, spec.n_scenes);

    scene::Dataset ds;
    ds.name = spec.name;
    ds.provenance = "forged";

    int index = 0;
    for (size_t m = 0; m < spec.mixture.size(); ++m) {
        const std::string& archetype = spec.mixture[m].first;
        for (int i = 0; i < counts[m]; ++i, ++index) {
            Rng rng = Rng::derive(spec.seed, archetype, uint64_t(index));
            BevScene s;
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "%s_%05d", spec.name.c_str(), index);
            s.id = idbuf;
            s.archetype = archetype;
            s.target_speed = float(rng.uniform(spec.speed_min, spec.speed_max));
            const int steps = spec.horizon_steps;
            const float dt = spec.dt;
            uint32_t next_id = 1;
            float crossing_x = -1.0f;
            bool dual_lane = false;
            SceneBits bits;

            if (archetype == "nominal") {
                s.tags.weather = Weather::clear;
                s.tags.time_of_day = rng.flip(0.15) ? TimeOfDay::night : TimeOfDay::day;
                s.tags.density = Density::sparse;
                add_parked_clutter(s, rng, 2, steps, dt, next_id);
                if (rng.flip(0.5)) {
                    // Distant lead at matching speed; never interacts.
                    const float gap = float(rng.uniform(36.0, 50.0));
                    s.objects.push_back(make_object(next_id++, ObjectClass::vehicle, 4.5f, 2.0f,
                                                    "car far ahead in the lane",
                                                    drive(gap, 0.0f, s.target_speed, 0.0f, 0.0f,
                                                          steps, dt)));
                }
                bits.keywords = {"lane_follow"};
                bits.phrase = "steady lane keeping on an open road";
            } else if (archetype == "night_low_visibility") {
                s.tags.weather = Weather::clear;
                s.tags.time_of_day = TimeOfDay::night;
                s.tags.density = Density::sparse;
                const float gap = float(rng.uniform(13.0, 18.0));
                s.objects.push_back(make_object(next_id++, ObjectClass::vehicle, 4.5f, 2.0f,
                                                "stalled car blocking the lane",
                                                drive(gap, 0.0f, 0.0f, 0.0f, 0.0f, steps, dt)));
                add_parked_clutter(s, rng, 1, steps, dt, next_id);
                bits.keywords = {"night", "low_visibility", "stalled_vehicle"};
                bits.phrase = "a stalled vehicle looms in the dark";
            } else if (archetype == "dense_cut_in") {
                s.tags.weather = Weather::clear;
                s.tags.time_of_day = rng.flip(0.2) ? TimeOfDay::night : TimeOfDay::day;
                s.tags.density = Density::dense;
                dual_lane = true;
                const float gap = float(rng.uniform(7.0, 11.0));
                const float v_obj = float(rng.uniform(3.0, 4.5));
                const float t_cut = float(rng.uniform(0.5, 1.5));
                s.objects.push_back(make_object(next_id++, ObjectClass::vehicle, 4.5f, 2.0f,
                                                "car merging closely into the lane",
                                                cut_in_drive(gap, 3.3f, v_obj, t_cut, 1.5f,
                                                             steps, dt)));
                const int extra = int(rng.uniform_int(1, 2));
                for (int e = 0; e < extra; ++e) {
                    const float x = float(rng.uniform(30.0, 60.0));
                    s.objects.push_back(make_object(
                        next_id++, ObjectClass::vehicle, 4.5f, 2.0f, "oncoming car",
                        drive(x, kAdjacentLaneY, -6.0f, 0.0f, 180.0f, steps, dt)));
                }
                bits.keywords = {"cut_in", "dense_traffic", "vehicle"};
                bits.phrase = "a car merges closely ahead in dense traffic";
            } else if (archetype == "pedestrian_crossing") {
                s.tags.weather = Weather::clear;
                s.tags.time_of_day = rng.flip(0.25) ? TimeOfDay::night : TimeOfDay::day;
                s.tags.density = Density::sparse;
                const float conflict_t = float(rng.uniform(1.2, 2.6));
                crossing_x = std::max(6.0f, s.target_speed * conflict_t);
                const float walk = 1.25f;
                const bool clears_early = rng.flip(0.3);
                const float y0 = -walk * conflict_t + (clears_early ? 3.5f : 0.0f);
                s.objects.push_back(make_object(next_id++, ObjectClass::pedestrian, 0.8f, 0.8f,
                                                "pedestrian on the crosswalk",
                                                drive(crossing_x, y0, 0.0f, walk, 90.0f, steps,
                                                      dt)));
                add_parked_clutter(s, rng, 1, steps, dt, next_id);
                bits.keywords = {"pedestrian", "crossing", "vulnerable_road_user"};
                bits.phrase = "a pedestrian steps onto the crossing";
            } else {  // rain_slow_traffic
                s.tags.weather = Weather::rain;
                s.tags.time_of_day = rng.flip(0.2) ? TimeOfDay::night : TimeOfDay::day;
                s.tags.density = Density::sparse;
                const float gap = float(rng.uniform(12.0, 16.0));
                const float v_obj = float(rng.uniform(2.0, 3.0));
                s.objects.push_back(make_object(next_id++, ObjectClass::vehicle, 4.5f, 2.0f,
                                                "slow car on the wet road",
                                                drive(gap, 0.0f, v_obj, 0.0f, 0.0f, steps, dt)));
                bits.keywords = {"rain", "slippery_road", "slow_traffic"};
                bits.phrase = "slow traffic on a slippery wet road";
            }

            const float road_end = s.target_speed * float(steps) * dt + 30.0f;
            s.map = straight_road(road_end, dual_lane, crossing_x);
            s.ego = expert_policy(s.objects, s.map, s.target_speed, steps, dt, spec.eps);

            s.keywords = bits.keywords;
            if (s.tags.time_of_day == TimeOfDay::night &&
                std::find(s.keywords.begin(), s.keywords.end(), "night") == s.keywords.end())
                s.keywords.push_back("night");
            if (s.tags.weather == Weather::rain &&
                std::find(s.keywords.begin(), s.keywords.end(), "rain") == s.keywords.end())
                s.keywords.push_back("rain");
            if (s.tags.density == Density::dense &&
                std::find(s.keywords.begin(), s.keywords.end(), "dense_traffic") ==
                    s.keywords.end())
                s.keywords.push_back("dense_traffic");

            s.caption = std::string("a ") + to_string(s.tags.density) + " " +
                        to_string(s.tags.time_of_day) + " drive in " +
                        to_string(s.tags.weather) + " weather; " + bits.phrase;
            ds.scenes.push_back(std::move(s));
        }
    }
    return ds;
}

const std::vector<std::string>& keyword_vocabulary() {
    static const std::vector<std::string> vocab = {
        "lane_follow",  "night",        "low_visibility", "stalled_vehicle",
        "cut_in",       "dense_traffic", "vehicle",        "pedestrian",
        "crossing",     "vulnerable_road_user", "rain",    "slippery_road",
        "slow_traffic"};
    return vocab;
}

const std::map<std::string, std::string>& surface_form_map() {
    static const std::map<std::string, std::string> m = {
        {"lane_follow", "lane_follow"},
        {"lane", "lane_follow"},
        {"night", "night"},
        {"dark", "night"},
        {"darkness", "night"},
        {"visibility", "low_visibility"},
        {"low_visibility", "low_visibility"},
        {"stalled", "stalled_vehicle"},
        {"stalled_vehicle", "stalled_vehicle"},
        {"stopped", "stalled_vehicle"},
        {"cut_in", "cut_in"},
        {"merges", "cut_in"},
        {"merging", "cut_in"},
        {"dense", "dense_traffic"},
        {"dense_traffic", "dense_traffic"},
        {"vehicle", "vehicle"},
        {"car", "vehicle"},
        {"pedestrian", "pedestrian"},
        {"pedestrians", "pedestrian"},
        {"crossing", "crossing"},
        {"crosswalk", "crossing"},
        {"vulnerable_road_user", "vulnerable_road_user"},
        {"rain", "rain"},
        {"rainy", "rain"},
        {"wet", "slippery_road"},
        {"slippery", "slippery_road"},
        {"slippery_road", "slippery_road"},
        {"slow", "slow_traffic"},
        {"slow_traffic", "slow_traffic"},
    };
    return m;
}

std::vector<std::string> harvest_keywords(const std::string& text) {
    const auto& forms = surface_form_map();
    std::vector<std::string> out;
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        auto it = forms.find(word);
        if (it != forms.end() &&
            std::find(out.begin(), out.end(), it->second) == out.end())
            out.push_back(it->second);
        word.clear();
    };
    for (char ch : text + " ") {
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')
            word.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
        else
            flush();
    }
    return out;
}

}  // namespace bevloop::forge
