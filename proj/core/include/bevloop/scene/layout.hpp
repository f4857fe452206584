#pragma once

#include <cstdint>

#include "bevloop/scene/raster.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::scene {

// Poison value for padded slots. Downstream encoders must consult the valid
// flag before touching any other field; reading a sentinel is an invariant
// violation they detect and reject.
inline constexpr float kSentinel = -1.0e6f;

// Vocabulary size for per-box dense-caption tokens and scene captions.
inline constexpr int kCaptionVocab = 256;
int caption_token(const std::string& text);
std::vector<int> caption_tokens(const std::string& text, int max_tokens);

struct BoxSlot {
    float b[4] = {kSentinel, kSentinel, kSentinel, kSentinel};  // x0, y0, x1, y1 in [0,1]
    float heading_deg = kSentinel;  // relative to the view axis, [-180, 180)
    float id01 = kSentinel;         // instance id folded to [0, 1)
    int token = -1;                 // dense-caption token id
    bool valid = false;
};

// Per-view, per-frame box slots plus the color-coded map raster
// (channels: lane_center, lane_edge, crossing).
struct ProjectedLayout {
    int n_views = 0;
    int n_frames = 0;
    int n_box = 0;
    std::vector<BoxSlot> slots;  // (n_views, n_frames, n_box)
    SceneRaster back;

    BoxSlot& at(int v, int t, int n) {
        return slots[(size_t(v) * n_frames + t) * n_box + n];
    }
    const BoxSlot& at(int v, int t, int n) const {
        return slots[(size_t(v) * n_frames + t) * n_box + n];
    }
};

// Azimuth (radians, relative to the view axis) and range of a world point.
std::pair<float, float> view_azimuth_range(const ViewXform& xf, float x, float y);

bool in_frustum(const ViewConfig& cfg, float azimuth_rad, float range_m);

// Projects object boxes into each view's normalized image coordinates and
// renders the map raster. At most n_box objects per (view, frame), nearest
// first; remaining slots are sentinel-poisoned with valid = false.
ProjectedLayout project_layout(const BevScene& scene, const ViewConfig& cfg, int n_box);

}  // namespace bevloop::scene
