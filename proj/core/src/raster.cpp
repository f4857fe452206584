#include "bevloop/scene/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"

namespace bevloop::scene {

namespace {
constexpr float kDegToRad = float(M_PI) / 180.0f;
}

ViewXform make_view_xform(const Pose2& ego, float yaw_offset_deg) {
    ViewXform xf;
    xf.ox = ego.x;
    xf.oy = ego.y;
    const float a = (ego.heading_deg + yaw_offset_deg) * kDegToRad;
    xf.cos_a = std::cos(a);
    xf.sin_a = std::sin(a);
    return xf;
}

std::pair<float, float> pixel_center(const ViewConfig& cfg, int row, int col) {
    const float forward = (float(cfg.h) - float(row) - 0.5f) * cfg.meters_per_px;
    const float left = (float(cfg.w) * 0.5f - float(col) - 0.5f) * cfg.meters_per_px;
    return {forward, left};
}

Plane plane_of(SceneRaster& raster, int v, int t, int c) {
    return Plane{&raster.at(v, t, c, 0, 0), raster.h, raster.w};
}

void fill_box(Plane plane, const ViewConfig& cfg, const ViewXform& xf, const Pose2& center,
              float length, float width, float value) {
    const auto [cf, cl] = xf.to_view(center.x, center.y);
    const float reach = 0.5f * std::sqrt(length * length + width * width);
    // Pixel index bounds of the box's circumscribed circle.
    const float mpp = cfg.meters_per_px;
    const int r_lo = std::max(0, int(std::floor(float(cfg.h) - (cf + reach) / mpp - 0.5f)));
    const int r_hi = std::min(cfg.h - 1, int(std::ceil(float(cfg.h) - (cf - reach) / mpp - 0.5f)));
    const int c_lo = std::max(0, int(std::floor(float(cfg.w) * 0.5f - (cl + reach) / mpp - 0.5f)));
    const int c_hi = std::min(cfg.w - 1, int(std::ceil(float(cfg.w) * 0.5f - (cl - reach) / mpp - 0.5f)));
    if (r_lo > r_hi || c_lo > c_hi) return;

    // Object axis in view coordinates.
    const float rel = std::atan2(
        -xf.sin_a * std::cos(center.heading_deg * kDegToRad) + xf.cos_a * std::sin(center.heading_deg * kDegToRad),
        xf.cos_a * std::cos(center.heading_deg * kDegToRad) + xf.sin_a * std::sin(center.heading_deg * kDegToRad));
    const float ch = std::cos(rel), sh = std::sin(rel);
    for (int r = r_lo; r <= r_hi; ++r) {
        for (int c = c_lo; c <= c_hi; ++c) {
            const auto [pf, pl] = pixel_center(cfg, r, c);
            const float df = pf - cf, dl = pl - cl;
            const float u = ch * df + sh * dl;   // along object length
            const float t = -sh * df + ch * dl;  // along object width
            if (std::fabs(u) <= 0.5f * length && std::fabs(t) <= 0.5f * width)
                plane.at(r, c) = std::max(plane.at(r, c), value);
        }
    }
}

void draw_polyline(Plane plane, const ViewConfig& cfg, const ViewXform& xf,
                   const std::vector<Pose2>& points, float value) {
    if (points.size() < 2) return;
    const float step = 0.4f * cfg.meters_per_px;
    for (size_t i = 0; i + 1 < points.size(); ++i) {
        const float dx = points[i + 1].x - points[i].x;
        const float dy = points[i + 1].y - points[i].y;
        const float len = std::sqrt(dx * dx + dy * dy);
        const int n = std::max(1, int(std::ceil(len / step)));
        for (int k = 0; k <= n; ++k) {
            const float s = float(k) / float(n);
            const auto [f, l] = xf.to_view(points[i].x + s * dx, points[i].y + s * dy);
            const int r = int(std::floor(float(cfg.h) - f / cfg.meters_per_px - 0.5f + 0.5f));
            const int c = int(std::floor(float(cfg.w) * 0.5f - l / cfg.meters_per_px - 0.5f + 0.5f));
            if (r >= 0 && r < cfg.h && c >= 0 && c < cfg.w)
                plane.at(r, c) = std::max(plane.at(r, c), value);
        }
    }
}

SceneRaster render_raster(const BevScene& scene, const ViewConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (int(scene.ego.steps()) < cfg.t_frames)
        throw InvalidArgument("render_raster: scene '" + scene.id + "' has " +
                              std::to_string(scene.ego.steps()) + " poses, need " +
                              std::to_string(cfg.t_frames));
    for (const auto& obj : scene.objects)
        if (obj.traj.steps() != scene.ego.steps())
            throw InvalidArgument("render_raster: object trajectory length mismatch in scene '" +
                                  scene.id + "'");

    const bool night = scene.tags.time_of_day == TimeOfDay::night;
    const bool rain = scene.tags.weather == Weather::rain;
    const float visibility = night ? kVisibilityNight : kVisibilityDay;
    const float ambient_base = (night ? 0.35f : 1.0f) - (rain ? 0.15f : 0.0f);
    const float road_value = rain ? 0.8f : 1.0f;

    SceneRaster out = SceneRaster::zeros(cfg.n_views, cfg.t_frames, 3, cfg.h, cfg.w);
    for (int v = 0; v < cfg.n_views; ++v) {
        for (int t = 0; t < cfg.t_frames; ++t) {
            const ViewXform xf = make_view_xform(scene.ego.poses[t], cfg.yaw_offsets_deg[v]);
            Plane fore = plane_of(out, v, t, 0);
            Plane road = plane_of(out, v, t, 1);
            Plane ambient = plane_of(out, v, t, 2);

            for (int r = 0; r < cfg.h; ++r)
                for (int c = 0; c < cfg.w; ++c) ambient.at(r, c) = ambient_base;

            for (const auto& layer : scene.map)
                for (const auto& poly : layer.polylines)
                    draw_polyline(road, cfg, xf, poly, road_value);

            for (const auto& obj : scene.objects)
                fill_box(fore, cfg, xf, obj.traj.poses[t], obj.length, obj.width, visibility);

            if (rain) {
                Rng noise(hash_combine(seed, hash_str(scene.id)),
                          hash_combine(uint64_t(v), uint64_t(t)));
                for (int r = 0; r < cfg.h; ++r) {
                    for (int c = 0; c < cfg.w; ++c) {
                        if (noise.flip(0.08)) {
                            const float d = float(noise.uniform(-0.3, 0.3));
                            ambient.at(r, c) = std::clamp(ambient.at(r, c) + d, 0.0f, 1.0f);
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::vector<int> cyclic_view_order(const ViewConfig& cfg) {
    std::vector<int> order(cfg.n_views);
    std::iota(order.begin(), order.end(), 0);
    auto norm = [&](int v) {
        float y = std::fmod(cfg.yaw_offsets_deg[v], 360.0f);
        if (y < 0.0f) y += 360.0f;
        return y;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return norm(a) < norm(b); });
    return order;
}

SceneRaster concat_views(const SceneRaster& raster, const ViewConfig& cfg) {
    if (raster.n_views != cfg.n_views)
        throw InvalidArgument("concat_views: raster/view-config view count mismatch");
    const auto order = cyclic_view_order(cfg);
    SceneRaster out = SceneRaster::zeros(1, raster.n_frames, raster.channels, raster.h,
                                         raster.n_views * raster.w);
    for (int t = 0; t < raster.n_frames; ++t)
        for (int c = 0; c < raster.channels; ++c)
            for (int slot = 0; slot < raster.n_views; ++slot) {
                const int v = order[slot];
                for (int y = 0; y < raster.h; ++y)
                    for (int x = 0; x < raster.w; ++x)
                        out.at(0, t, c, y, slot * raster.w + x) = raster.at(v, t, c, y, x);
            }
    return out;
}

SceneRaster split_views(const SceneRaster& tiled, const ViewConfig& cfg) {
    if (tiled.n_views != 1 || tiled.w != cfg.n_views * cfg.w)
        throw InvalidArgument("split_views: tiled raster does not match view config");
    const auto order = cyclic_view_order(cfg);
    SceneRaster out =
        SceneRaster::zeros(cfg.n_views, tiled.n_frames, tiled.channels, tiled.h, cfg.w);
    for (int t = 0; t < tiled.n_frames; ++t)
        for (int c = 0; c < tiled.channels; ++c)
            for (int slot = 0; slot < cfg.n_views; ++slot) {
                const int v = order[slot];
                for (int y = 0; y < tiled.h; ++y)
                    for (int x = 0; x < cfg.w; ++x)
                        out.at(v, t, c, y, x) = tiled.at(0, t, c, y, slot * cfg.w + x);
            }
    return out;
}

}  // namespace bevloop::scene
