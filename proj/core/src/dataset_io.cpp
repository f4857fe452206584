#include "bevloop/scene/dataset_io.hpp"

#include <fstream>

#include <json.hpp>

#include "bevloop/common/error.hpp"

namespace bevloop::scene {

using nlohmann::json;

namespace {

json field(const json& j, const char* name, long line) {
    if (!j.contains(name))
        throw ParseError(std::string("missing field '") + name + "'", line);
    return j.at(name);
}

json pose_to_json(const Pose2& p) {
    return json::array({double(p.x), double(p.y), double(p.heading_deg)});
}

Pose2 pose_from_json(const json& j, long line) {
    if (!j.is_array() || j.size() != 3) throw ParseError("pose must be [x, y, heading]", line);
    return Pose2{j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

json traj_to_json(const Trajectory& t) {
    json poses = json::array();
    for (const auto& p : t.poses) poses.push_back(pose_to_json(p));
    return json{{"dt", double(t.dt)}, {"poses", std::move(poses)}};
}

Trajectory traj_from_json(const json& j, long line) {
    Trajectory t;
    t.dt = field(j, "dt", line).get<float>();
    for (const auto& p : field(j, "poses", line)) t.poses.push_back(pose_from_json(p, line));
    return t;
}

json raster_to_json(const SceneRaster& r) {
    json values = json::array();
    for (float v : r.values) values.push_back(double(v));
    return json{{"shape", {r.n_views, r.n_frames, r.channels, r.h, r.w}},
                {"values", std::move(values)}};
}

SceneRaster raster_from_json(const json& j, long line) {
    const json shape = field(j, "shape", line);
    if (!shape.is_array() || shape.size() != 5)
        throw ParseError("raster shape must have 5 dims", line);
    SceneRaster r;
    r.n_views = shape[0].get<int>();
    r.n_frames = shape[1].get<int>();
    r.channels = shape[2].get<int>();
    r.h = shape[3].get<int>();
    r.w = shape[4].get<int>();
    const json& values = field(j, "values", line);
    if (values.size() != r.size()) throw ParseError("raster value count mismatch", line);
    r.values.reserve(values.size());
    for (const auto& v : values) r.values.push_back(v.get<float>());
    return r;
}

json scene_to_json(const BevScene& s) {
    json objects = json::array();
    for (const auto& o : s.objects) {
        objects.push_back(json{{"instance_id", o.instance_id},
                               {"class", to_string(o.cls)},
                               {"length", double(o.length)},
                               {"width", double(o.width)},
                               {"dense_caption", o.dense_caption},
                               {"traj", traj_to_json(o.traj)}});
    }
    json map = json::array();
    for (const auto& layer : s.map) {
        json polylines = json::array();
        for (const auto& poly : layer.polylines) {
            json pts = json::array();
            for (const auto& p : poly) pts.push_back(json::array({double(p.x), double(p.y)}));
            polylines.push_back(std::move(pts));
        }
        map.push_back(json{{"class", to_string(layer.cls)}, {"polylines", std::move(polylines)}});
    }
    json rec{{"id", s.id},
             {"ego", traj_to_json(s.ego)},
             {"objects", std::move(objects)},
             {"map", std::move(map)},
             {"caption", s.caption},
             {"keywords", s.keywords},
             {"tags",
              json{{"weather", to_string(s.tags.weather)},
                   {"time_of_day", to_string(s.tags.time_of_day)},
                   {"density", to_string(s.tags.density)}}},
             {"archetype", s.archetype},
             {"target_speed", double(s.target_speed)}};
    if (s.raster) rec["raster"] = raster_to_json(*s.raster);
    return rec;
}

BevScene scene_from_json(const json& j, long line) {
    BevScene s;
    s.id = field(j, "id", line).get<std::string>();
    s.ego = traj_from_json(field(j, "ego", line), line);
    for (const auto& oj : field(j, "objects", line)) {
        ObjectBox o;
        o.instance_id = field(oj, "instance_id", line).get<uint32_t>();
        o.cls = object_class_from_string(field(oj, "class", line).get<std::string>());
        o.length = field(oj, "length", line).get<float>();
        o.width = field(oj, "width", line).get<float>();
        o.dense_caption = field(oj, "dense_caption", line).get<std::string>();
        o.traj = traj_from_json(field(oj, "traj", line), line);
        s.objects.push_back(std::move(o));
    }
    for (const auto& lj : field(j, "map", line)) {
        MapLayer layer;
        layer.cls = map_class_from_string(field(lj, "class", line).get<std::string>());
        for (const auto& pj : field(lj, "polylines", line)) {
            std::vector<Pose2> poly;
            for (const auto& pt : pj) {
                if (!pt.is_array() || pt.size() != 2)
                    throw ParseError("map point must be [x, y]", line);
                poly.push_back(Pose2{pt[0].get<float>(), pt[1].get<float>(), 0.0f});
            }
            layer.polylines.push_back(std::move(poly));
        }
        s.map.push_back(std::move(layer));
    }
    s.caption = field(j, "caption", line).get<std::string>();
    for (const auto& k : field(j, "keywords", line)) s.keywords.push_back(k.get<std::string>());
    const json tags = field(j, "tags", line);
    s.tags.weather = weather_from_string(field(tags, "weather", line).get<std::string>());
    s.tags.time_of_day =
        time_of_day_from_string(field(tags, "time_of_day", line).get<std::string>());
    s.tags.density = density_from_string(field(tags, "density", line).get<std::string>());
    s.archetype = field(j, "archetype", line).get<std::string>();
    s.target_speed = field(j, "target_speed", line).get<float>();
    if (j.contains("raster")) s.raster = raster_from_json(j.at("raster"), line);
    return s;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);
    json header{{"schema", kDatasetSchema},
                {"version", kDatasetVersion},
                {"name", dataset.name},
                {"provenance", dataset.provenance},
                {"count", dataset.scenes.size()}};
    out << header.dump() << "\n";
    for (const auto& s : dataset.scenes) out << scene_to_json(s).dump() << "\n";
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string text;
    long lineno = 0;
    Dataset ds;
    bool header_seen = false;
    size_t expected = 0;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
        }
        try {
            if (!header_seen) {
                if (field(j, "schema", lineno).get<std::string>() != kDatasetSchema)
                    throw ParseError("unexpected schema", lineno);
                if (field(j, "version", lineno).get<int>() != kDatasetVersion)
                    throw ParseError("unsupported dataset version", lineno);
                ds.name = field(j, "name", lineno).get<std::string>();
                ds.provenance = field(j, "provenance", lineno).get<std::string>();
                expected = field(j, "count", lineno).get<size_t>();
                header_seen = true;
            } else {
                ds.scenes.push_back(scene_from_json(j, lineno));
            }
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), lineno);
        }
    }
    if (!header_seen) throw ParseError("missing dataset header", 1);
    if (ds.scenes.size() != expected)
        throw ParseError("dataset truncated: expected " + std::to_string(expected) +
                             " scenes, found " + std::to_string(ds.scenes.size()),
                         lineno);
    return ds;
}

}  // namespace bevloop::scene
