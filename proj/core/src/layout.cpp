#include "bevloop/scene/layout.hpp"

#include <algorithm>
#include <cmath>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"

namespace bevloop::scene {

namespace {
constexpr float kDegToRad = float(M_PI) / 180.0f;
}

int caption_token(const std::string& text) {
    return int(hash_str(text) % uint64_t(kCaptionVocab - 1)) + 1;  // 0 is the pad token
}

std::vector<int> caption_tokens(const std::string& text, int max_tokens) {
    std::vector<int> out;
    std::string word;
    for (char ch : text + " ") {
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') {
            word.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!word.empty()) {
            if (int(out.size()) < max_tokens) out.push_back(caption_token(word));
            word.clear();
        }
    }
    out.resize(max_tokens, 0);
    return out;
}

std::pair<float, float> view_azimuth_range(const ViewXform& xf, float x, float y) {
    const auto [f, l] = xf.to_view(x, y);
    return {std::atan2(l, f), std::sqrt(f * f + l * l)};
}

bool in_frustum(const ViewConfig& cfg, float azimuth_rad, float range_m) {
    return std::fabs(azimuth_rad) <= 0.5f * cfg.fov_deg * kDegToRad &&
           range_m < cfg.range_m();
}

ProjectedLayout project_layout(const BevScene& scene, const ViewConfig& cfg, int n_box) {
    cfg.validate();
    if (n_box <= 0) throw InvalidArgument("project_layout: n_box must be positive");
    if (int(scene.ego.steps()) < cfg.t_frames)
        throw InvalidArgument("project_layout: scene shorter than t_frames");

    ProjectedLayout out;
    out.n_views = cfg.n_views;
    out.n_frames = cfg.t_frames;
    out.n_box = n_box;
    out.slots.assign(size_t(cfg.n_views) * cfg.t_frames * n_box, BoxSlot{});
    out.back = SceneRaster::zeros(cfg.n_views, cfg.t_frames, 3, cfg.h, cfg.w);

    for (int v = 0; v < cfg.n_views; ++v) {
        for (int t = 0; t < cfg.t_frames; ++t) {
            const ViewXform xf = make_view_xform(scene.ego.poses[t], cfg.yaw_offsets_deg[v]);

            for (const auto& layer : scene.map) {
                const int ch = layer.cls == MapClass::lane_center ? 0
                             : layer.cls == MapClass::lane_edge   ? 1
                                                                  : 2;
                Plane plane = plane_of(out.back, v, t, ch);
                for (const auto& poly : layer.polylines)
                    draw_polyline(plane, cfg, xf, poly, 1.0f);
            }

            // In-frustum objects, nearest first, capped at n_box.
            std::vector<std::pair<float, const ObjectBox*>> hits;
            for (const auto& obj : scene.objects) {
                const Pose2& p = obj.traj.poses[t];
                const auto [az, range] = view_azimuth_range(xf, p.x, p.y);
                if (in_frustum(cfg, az, range)) hits.emplace_back(range, &obj);
            }
            std::stable_sort(hits.begin(), hits.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            const int keep = std::min<int>(n_box, int(hits.size()));

            for (int n = 0; n < keep; ++n) {
                const ObjectBox& obj = *hits[n].second;
                const Pose2& p = obj.traj.poses[t];
                BoxSlot& slot = out.at(v, t, n);

                // Footprint corners -> normalized image box.
                const float hh = p.heading_deg * kDegToRad;
                const float cs = std::cos(hh), sn = std::sin(hh);
                float x0 = 2.0f, y0 = 2.0f, x1 = -1.0f, y1 = -1.0f;
                for (int k = 0; k < 4; ++k) {
                    const float su = (k & 1) ? 0.5f : -0.5f;
                    const float sv = (k & 2) ? 0.5f : -0.5f;
                    const float wx = p.x + su * obj.length * cs - sv * obj.width * sn;
                    const float wy = p.y + su * obj.length * sn + sv * obj.width * cs;
                    const auto [f, l] = xf.to_view(wx, wy);
                    const float nx = 0.5f - l / (float(cfg.w) * cfg.meters_per_px);
                    const float ny = 1.0f - f / (float(cfg.h) * cfg.meters_per_px);
                    x0 = std::min(x0, nx);
                    y0 = std::min(y0, ny);
                    x1 = std::max(x1, nx);
                    y1 = std::max(y1, ny);
                }
                slot.b[0] = std::clamp(x0, 0.0f, 1.0f);
                slot.b[1] = std::clamp(y0, 0.0f, 1.0f);
                slot.b[2] = std::clamp(x1, 0.0f, 1.0f);
                slot.b[3] = std::clamp(y1, 0.0f, 1.0f);

                const auto [az, range] = view_azimuth_range(xf, p.x, p.y);
                (void)az;
                (void)range;
                const float view_axis = scene.ego.poses[t].heading_deg + cfg.yaw_offsets_deg[v];
                slot.heading_deg = wrap_heading(p.heading_deg - view_axis);
                slot.id01 = float(obj.instance_id % 997u) / 997.0f;
                slot.token = caption_token(obj.dense_caption);
                slot.valid = true;
            }
        }
    }
    return out;
}

}  // namespace bevloop::scene
