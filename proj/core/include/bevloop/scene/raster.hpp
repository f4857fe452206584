#pragma once

#include <cstdint>
#include <utility>

#include "bevloop/scene/types.hpp"

namespace bevloop::scene {

// Foreground occupancy values by visibility; the detector thresholds on
// these, so night scenes genuinely hide objects from it.
inline constexpr float kVisibilityDay = 1.0f;
inline constexpr float kVisibilityNight = 0.45f;

// World -> per-view frame transform at one frame. View coordinates are
// (forward, left) relative to the view axis (ego heading + yaw offset).
struct ViewXform {
    float ox = 0.0f, oy = 0.0f;
    float cos_a = 1.0f, sin_a = 0.0f;

    std::pair<float, float> to_view(float x, float y) const {
        const float dx = x - ox, dy = y - oy;
        return {cos_a * dx + sin_a * dy, -sin_a * dx + cos_a * dy};
    }
};

ViewXform make_view_xform(const Pose2& ego, float yaw_offset_deg);

// (forward, left) of the center of pixel (row, col).
std::pair<float, float> pixel_center(const ViewConfig& cfg, int row, int col);

// One (h, w) channel plane inside a SceneRaster.
struct Plane {
    float* data;
    int h, w;
    float& at(int r, int c) { return data[size_t(r) * w + c]; }
};

Plane plane_of(SceneRaster& raster, int v, int t, int c);

// Fills pixels whose centers fall inside the oriented box; writes
// max(existing, value) so overlaps keep the brighter mark.
void fill_box(Plane plane, const ViewConfig& cfg, const ViewXform& xf, const Pose2& center,
              float length, float width, float value);

void draw_polyline(Plane plane, const ViewConfig& cfg, const ViewXform& xf,
                   const std::vector<Pose2>& points, float value);

// Renders (n_views, t_frames, 3, h, w): foreground / road / ambient.
// Deterministic for a fixed (scene, cfg, seed); rain speckle is seeded
// per (seed, scene id, view, frame).
SceneRaster render_raster(const BevScene& scene, const ViewConfig& cfg, uint64_t seed);

// Tiles views left-to-right in cyclic yaw order into (1, t, c, h, n_views*w).
SceneRaster concat_views(const SceneRaster& raster, const ViewConfig& cfg);

// Inverse of concat_views for the same cfg.
SceneRaster split_views(const SceneRaster& tiled, const ViewConfig& cfg);

// View indices sorted by yaw offset normalized to [0, 360).
std::vector<int> cyclic_view_order(const ViewConfig& cfg);

}  // namespace bevloop::scene
