#include "bevloop/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"

namespace bevloop::planner {

using nlohmann::json;
using scene::BevScene;
using scene::Pose2;
using scene::SceneRaster;
using scene::Trajectory;
using scene::ViewConfig;

std::vector<Detection> run_detector(const BevScene& bev, const SceneRaster& raster,
                                    const ViewConfig& cfg) {
    std::vector<Detection> out;
    for (const auto& obj : bev.objects) {
        Detection det;
        det.instance_id = obj.instance_id;
        det.cls = obj.cls;
        det.length = obj.length;
        det.width = obj.width;

        // Best mean foreground value over the footprint across views/frames.
        float best = 0.0f;
        for (int v = 0; v < raster.n_views; ++v) {
            for (int t = 0; t < raster.n_frames && t < int(obj.traj.steps()); ++t) {
                const scene::ViewXform xf =
                    scene::make_view_xform(bev.ego.poses[t], cfg.yaw_offsets_deg[v]);
                const Pose2& p = obj.traj.poses[t];
                // Sample the footprint interior on a small fixed lattice.
                float sum = 0.0f;
                int n = 0;
                const float hh = p.heading_deg * float(M_PI) / 180.0f;
                const float ch = std::cos(hh), sh = std::sin(hh);
                for (int a = 0; a < 3; ++a) {
                    for (int b = 0; b < 3; ++b) {
                        const float u = (float(a) / 2.0f - 0.5f) * obj.length * 0.8f;
                        const float w = (float(b) / 2.0f - 0.5f) * obj.width * 0.8f;
                        const float wx = p.x + u * ch - w * sh;
                        const float wy = p.y + u * sh + w * ch;
                        const auto [f, l] = xf.to_view(wx, wy);
                        const int r = int(std::floor(float(cfg.h) - f / cfg.meters_per_px));
                        const int c =
                            int(std::floor(float(cfg.w) * 0.5f - l / cfg.meters_per_px));
                        if (r >= 0 && r < cfg.h && c >= 0 && c < cfg.w) {
                            sum += raster.at(v, t, 0, r, c);
                            ++n;
                        }
                    }
                }
                if (n > 0) best = std::max(best, sum / float(n));
            }
        }
        det.detected = best >= kDetectVisibility;
        if (det.detected) det.predicted = obj.traj;
        out.push_back(std::move(det));
    }
    return out;
}

PlannerOutput plan_scene(const PlannerModel& model, const BevScene& bev,
                         const SceneRaster& raster, const ViewConfig& cfg,
                         const std::string& exclude_scene_id) {
    PlannerOutput out;
    out.plan = model.plan(raster, KnnPlanner::initial_speed(bev.ego), exclude_scene_id);
    out.detections = run_detector(bev, raster, cfg);
    return out;
}

KnnPlanner::KnnPlanner(KnnConfig cfg, ViewConfig views, uint64_t render_seed)
    : cfg_(cfg), views_(views), render_seed_(render_seed) {
    if (cfg_.k <= 0 || cfg_.grid <= 0 || cfg_.t_e2e_steps <= 0)
        throw InvalidArgument("KnnPlanner: k, grid and t_e2e_steps must be positive");
    views_.validate();
}

float KnnPlanner::initial_speed(const Trajectory& traj) {
    if (traj.poses.size() < 2) return 0.0f;
    const float dx = traj.poses[1].x - traj.poses[0].x;
    const float dy = traj.poses[1].y - traj.poses[0].y;
    return std::sqrt(dx * dx + dy * dy) / traj.dt;
}

std::vector<float> KnnPlanner::pooled_feature(const SceneRaster& raster, int grid,
                                              float ego_speed, float speed_scale) {
    // Mean over (view, frame), then block means on a grid x grid partition.
    const int base_channels = std::min(raster.channels, 3);
    std::vector<float> feature(size_t(base_channels) * grid * grid + 1, 0.0f);
    for (int c = 0; c < base_channels; ++c) {
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                const int y0 = gy * raster.h / grid, y1 = (gy + 1) * raster.h / grid;
                const int x0 = gx * raster.w / grid, x1 = (gx + 1) * raster.w / grid;
                double sum = 0.0;
                long n = 0;
                for (int v = 0; v < raster.n_views; ++v)
                    for (int t = 0; t < raster.n_frames; ++t)
                        for (int y = y0; y < y1; ++y)
                            for (int x = x0; x < x1; ++x) {
                                sum += raster.at(v, t, c, y, x);
                                ++n;
                            }
                feature[(size_t(c) * grid + gy) * grid + gx] =
                    n > 0 ? float(sum / double(n)) : 0.0f;
            }
        }
    }
    feature.back() = ego_speed * speed_scale;
    return feature;
}

uint64_t KnnPlanner::feature_digest(const std::vector<float>& feature) {
    uint64_t h = 0x9ae16a3b2f90404full;
    for (float f : feature) {
        const int64_t q = int64_t(std::llround(double(f) * 1e5));
        h = hash_combine(h, uint64_t(q));
    }
    return h;
}

SceneRaster KnnPlanner::scene_raster(const BevScene& bev) const {
    if (bev.raster) return *bev.raster;
    return scene::render_raster(bev, views_, render_seed_);
}

void KnnPlanner::train(const scene::Dataset& dataset) {
    for (const auto& bev : dataset.scenes) {
        if (int(bev.ego.steps()) <= cfg_.t_e2e_steps)
            throw InvalidArgument("KnnPlanner::train: scene '" + bev.id +
                                  "' shorter than t_e2e_steps");
        const SceneRaster raster = scene_raster(bev);
        auto feature =
            pooled_feature(raster, cfg_.grid, initial_speed(bev.ego), cfg_.speed_scale);
        const uint64_t digest = feature_digest(feature);
        if (digests_.count(digest)) continue;
        digests_.insert(digest);
        BankEntry entry;
        entry.scene_id = bev.id;
        entry.feature = std::move(feature);
        for (int k = 0; k < cfg_.t_e2e_steps; ++k) {
            const Pose2& a = bev.ego.poses[k];
            const Pose2& b = bev.ego.poses[k + 1];
            entry.deltas.push_back({b.x - a.x, b.y - a.y,
                                    scene::wrap_heading(b.heading_deg - a.heading_deg)});
        }
        bank_.push_back(std::move(entry));
    }
}

Trajectory KnnPlanner::plan(const SceneRaster& raster, float ego_speed,
                            const std::string& exclude_scene_id) const {
    if (bank_.empty()) throw InvalidArgument("KnnPlanner::plan: empty bank");
    const auto feature = pooled_feature(raster, cfg_.grid, ego_speed, cfg_.speed_scale);

    struct Cand {
        double dist;
        const BankEntry* entry;
    };
    std::vector<Cand> cands;
    cands.reserve(bank_.size());
    for (const auto& e : bank_) {
        if (!exclude_scene_id.empty() && e.scene_id == exclude_scene_id) continue;
        if (e.feature.size() != feature.size())
            throw InvalidArgument("KnnPlanner::plan: feature dimension mismatch");
        double d2 = 0.0;
        for (size_t i = 0; i < feature.size(); ++i) {
            const double d = double(feature[i]) - double(e.feature[i]);
            d2 += d * d;
        }
        cands.push_back({std::sqrt(d2), &e});
    }
    if (cands.empty()) throw InvalidArgument("KnnPlanner::plan: bank exhausted by exclusion");
    // Ties resolve to the lexicographically smaller scene id.
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.entry->scene_id < b.entry->scene_id;
    });
    const int k = std::min<int>(cfg_.k, int(cands.size()));

    double wsum = 0.0;
    std::vector<double> weights(k);
    for (int i = 0; i < k; ++i) {
        weights[i] = 1.0 / (cands[i].dist + 1e-3);
        wsum += weights[i];
    }

    Trajectory plan;
    plan.dt = cfg_.dt;
    plan.poses.push_back(Pose2{0.0f, 0.0f, 0.0f});
    float x = 0.0f, y = 0.0f, heading = 0.0f;
    for (int step = 0; step < cfg_.t_e2e_steps; ++step) {
        double dx = 0.0, dy = 0.0, dh = 0.0;
        for (int i = 0; i < k; ++i) {
            const auto& d = cands[i].entry->deltas[step];
            dx += weights[i] * d[0];
            dy += weights[i] * d[1];
            dh += weights[i] * d[2];
        }
        x += float(dx / wsum);
        y += float(dy / wsum);
        heading = scene::wrap_heading(heading + float(dh / wsum));
        plan.poses.push_back(Pose2{x, y, heading});
    }
    return plan;
}

std::string KnnPlanner::fingerprint() const {
    std::vector<uint64_t> digests;
    digests.reserve(bank_.size());
    for (const auto& e : bank_) digests.push_back(feature_digest(e.feature));
    std::sort(digests.begin(), digests.end());
    uint64_t h = 0x51ed270b7a2fca9dull;
    for (uint64_t d : digests) h = hash_combine(h, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void KnnPlanner::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write planner bank: " + path);
    json header{{"schema", "bevloop.knn_bank"},
                {"version", 1},
                {"k", cfg_.k},
                {"grid", cfg_.grid},
                {"t_e2e_steps", cfg_.t_e2e_steps},
                {"dt", double(cfg_.dt)},
                {"speed_scale", double(cfg_.speed_scale)},
                {"render_seed", render_seed_},
                {"views",
                 {{"n_views", views_.n_views},
                  {"fov_deg", double(views_.fov_deg)},
                  {"h", views_.h},
                  {"w", views_.w},
                  {"meters_per_px", double(views_.meters_per_px)},
                  {"t_frames", views_.t_frames}}},
                {"count", bank_.size()}};
    json yaws = json::array();
    for (float yv : views_.yaw_offsets_deg) yaws.push_back(double(yv));
    header["views"]["yaw_offsets_deg"] = yaws;
    out << header.dump() << "\n";
    for (const auto& e : bank_) {
        json feat = json::array();
        for (float f : e.feature) feat.push_back(double(f));
        json deltas = json::array();
        for (const auto& d : e.deltas)
            deltas.push_back(json::array({double(d[0]), double(d[1]), double(d[2])}));
        out << json{{"scene_id", e.scene_id}, {"feature", feat}, {"deltas", deltas}}.dump()
            << "\n";
    }
}

KnnPlanner KnnPlanner::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open planner bank: " + path);
    std::string text;
    long lineno = 0;
    KnnConfig cfg;
    ViewConfig views;
    uint64_t render_seed = 0;
    std::unique_ptr<KnnPlanner> planner;
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
        if (!planner) {
            if (j.value("schema", "") != "bevloop.knn_bank")
                throw ParseError("unexpected bank schema", lineno);
            if (j.value("version", 0) != 1) throw ParseError("unsupported bank version", lineno);
            cfg.k = j.at("k").get<int>();
            cfg.grid = j.at("grid").get<int>();
            cfg.t_e2e_steps = j.at("t_e2e_steps").get<int>();
            cfg.dt = j.at("dt").get<float>();
            cfg.speed_scale = j.at("speed_scale").get<float>();
            render_seed = j.at("render_seed").get<uint64_t>();
            const json& vj = j.at("views");
            views.n_views = vj.at("n_views").get<int>();
            views.fov_deg = vj.at("fov_deg").get<float>();
            views.h = vj.at("h").get<int>();
            views.w = vj.at("w").get<int>();
            views.meters_per_px = vj.at("meters_per_px").get<float>();
            views.t_frames = vj.at("t_frames").get<int>();
            views.yaw_offsets_deg.clear();
            for (const auto& yv : vj.at("yaw_offsets_deg"))
                views.yaw_offsets_deg.push_back(yv.get<float>());
            expected = j.at("count").get<size_t>();
            planner = std::make_unique<KnnPlanner>(cfg, views, render_seed);
        } else {
            BankEntry e;
            e.scene_id = j.at("scene_id").get<std::string>();
            for (const auto& f : j.at("feature")) e.feature.push_back(f.get<float>());
            for (const auto& d : j.at("deltas"))
                e.deltas.push_back({d[0].get<float>(), d[1].get<float>(), d[2].get<float>()});
            const uint64_t digest = feature_digest(e.feature);
            if (!planner->digests_.count(digest)) {
                planner->digests_.insert(digest);
                planner->bank_.push_back(std::move(e));
            }
        }
    }
    if (!planner) throw ParseError("missing bank header", 1);
    if (planner->bank_.size() != expected)
        throw ParseError("bank truncated: expected " + std::to_string(expected) + " entries",
                         lineno);
    return std::move(*planner);
}

}  // namespace bevloop::planner
