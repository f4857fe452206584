#pragma once

#include <cstdint>
#include <vector>

#include "bevloop/common/rng.hpp"
#include "bevloop/gen/model.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::gen {

// One training pair: clean raster in model space ([0,1] pixel values mapped
// to [-1,1]) plus its conditioning.
struct TrainSample {
    Tensor<float> x0;
    SceneCond cond;
};

// Map raster values between pixel space and model space.
inline float to_model_space(float v) { return 2.0f * v - 1.0f; }
inline float to_pixel_space(float v) {
    const float p = 0.5f * (v + 1.0f);
    return p < 0.0f ? 0.0f : (p > 1.0f ? 1.0f : p);
}

// Renders the scene (or reuses its stored raster), projects the layout and
// tokenizes caption plus keywords. The view geometry must match the
// generator dims.
TrainSample make_train_sample(const scene::BevScene& s, const scene::ViewConfig& vc,
                              const GenConfig& cfg, uint64_t render_seed);

// One conditioning draw per training sample: a first flip nulls every
// modality together, otherwise each modality flips independently.
void apply_null_dropout(SceneCond& cond, Rng& rng, float rate);

struct TrainOptions {
    int epochs = 30;
    int batch = 4;
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<float> epoch_loss;  // mean per-batch loss, one entry per epoch
};

// Straight-path matching: draw t ~ U[0,1), mix z_t = (1-t) x0 + t x1 with
// unit noise x1, regress the patch tokens of x1 - x0. Conditioning drops to
// null rows with probability null_dropout (whole set first, then each
// modality independently). Adam, bit-deterministic for a fixed seed.
TrainReport train(GenModel& model, const std::vector<TrainSample>& data, const TrainOptions& opt);

}  // namespace bevloop::gen
