#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bevloop/agent/requirements.hpp"
#include "bevloop/gen/model.hpp"
#include "bevloop/gen/train.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::gen {

// Called once per Euler step with the step index, the time before the
// update and the guided velocity of every sample in the batch.
using StepObserver =
    std::function<void(int step, float t_before, const std::vector<Tensor<float>>& guided)>;

// Four-pass guidance: unconditional, plus caption, plus map, plus boxes.
// The guided velocity is u1 + gt (u2-u1) + gb (u3-u2) + gf (u4-u3); with all
// gains at 1 it collapses to the fully conditioned pass.
std::vector<Tensor<float>> guided_velocity(GenModelT<float>& model,
                                           const std::vector<Tensor<float>>& z,
                                           const std::vector<float>& t,
                                           const std::vector<SceneCond>& conds);

// Euler integration of the velocity field from noise (t=1) to data (t=0),
// sample_steps equal steps. Returns model-space rasters [V,T,3,H,W].
std::vector<Tensor<float>> sample(GenModelT<float>& model, const std::vector<SceneCond>& conds,
                                  uint64_t seed, const StepObserver& observer = {});

// Temporal extension: the first `overlap` frames stay clamped to the last
// `overlap` frames of prev along the whole path (noised consistently with
// the current time), so the continuation agrees exactly at t=0.
Tensor<float> extend_video(GenModelT<float>& model, const SceneCond& cond,
                           const Tensor<float>& prev, uint64_t seed);

scene::SceneRaster raster_from_model(const Tensor<float>& z);

struct GenerateOptions {
    uint64_t seed = 0;
    std::string id_prefix = "gen";
};

// Samples one raster per retrieved exemplar of each requirement, so R
// requirements with K selections each yield R*K scenes. Each output scene
// copies its exemplar's content, merges in the requirement keywords and
// carries the sampled raster.
scene::Dataset generate_dataset(GenModelT<float>& model, const std::vector<agent::Requirement>& reqs,
                                const scene::Dataset& train, const scene::ViewConfig& vc,
                                const GenerateOptions& opt);

}  // namespace bevloop::gen
