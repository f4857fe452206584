#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bevloop/gen/tape.hpp"
#include "bevloop/gen/tensor.hpp"
#include "bevloop/scene/layout.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::gen {

struct GenConfig {
    int n_views = 1;
    int n_frames = 4;
    int height = 16;
    int width = 16;
    int patch = 4;
    int channels = 64;
    int n_blocks = 2;
    int n_heads = 4;
    int fourier_bands = 4;
    int n_box = 6;
    int text_len = 8;
    int vocab = scene::kCaptionVocab;
    int sample_steps = 30;
    int overlap = 4;  // clamped conditioning frames when extending
    float guide_text = 2.0f;
    float guide_back = 2.0f;
    float guide_fore = 7.0f;
    float null_dropout = 0.05f;
    float lr = 1e-3f;

    void validate() const;
    int tokens_per_frame() const { return (height / patch) * (width / patch); }
    int patch_dim() const { return 3 * patch * patch; }
    int n_control() const { return std::max(1, n_blocks / 2); }

    std::string to_json() const;
    static GenConfig from_json(const std::string& text);
};

// Interleaved frequency features: [sin(pi x), cos(pi x), sin(2 pi x),
// cos(2 pi x), ...], bands doublings. out must hold 2*bands values.
template <typename S>
void fourier_embed(S x, int bands, S* out);

// [V,T,3,H,W] raster <-> token matrix [V*T*S, 3*p*p]; patches scan row-major
// per frame, features are channel-major within a patch.
template <typename S>
Tensor<S> patchify(const Tensor<S>& x, const GenConfig& cfg);
template <typename S>
Tensor<S> unpatchify(const Tensor<S>& tokens, const GenConfig& cfg);

Tensor<float> raster_to_tensor(const scene::SceneRaster& r);
scene::SceneRaster tensor_to_raster(const Tensor<float>& t);

// Conditioning bundle for one sample. Null flags blank out a modality
// (classifier-free style): boxes and text fall back to learned null rows,
// the road raster to zeros.
struct SceneCond {
    scene::ProjectedLayout layout;
    std::vector<int> text_tokens;  // padded/truncated to text_len by the model
    bool null_box = false;
    bool null_text = false;
    bool null_road = false;
};

template <typename S>
struct ParamStore {
    std::vector<std::string> order;
    std::map<std::string, Tensor<S>> tensors;

    Tensor<S>& create(const std::string& name, std::vector<int> shape, uint64_t seed, S scale);
    Tensor<S>& at(const std::string& name);
    const Tensor<S>& at(const std::string& name) const;
    size_t total_scalars() const;
};

// Conditional velocity model over raster tokens: factorized attention along
// time, then across all views of one frame, then cross-attention into the
// box/text conditioning, with a control branch (copies of the first half of
// the blocks, fed road conditioning, merged through zero-initialized
// projections). Predicts the straight-path displacement field.
template <typename S>
class GenModelT {
  public:
    using Var = typename Tape<S>::Var;

    GenModelT(const GenConfig& cfg, uint64_t seed);

    const GenConfig& config() const { return cfg_; }
    ParamStore<S>& params() { return params_; }
    const ParamStore<S>& params() const { return params_; }

    // Predicted velocity tokens [B*V*T*S, patch_dim]. param_vars receives
    // the leaf var of every parameter so the trainer can read gradients.
    Var forward(Tape<S>& tape, const std::vector<Tensor<S>>& z, const std::vector<S>& t,
                const std::vector<SceneCond>& conds,
                std::map<std::string, Var>* param_vars = nullptr);

    // Convenience: no-grad velocity for one batch, returned per sample as
    // [V,T,3,H,W].
    std::vector<Tensor<S>> velocity(const std::vector<Tensor<S>>& z, const std::vector<S>& t,
                                    const std::vector<SceneCond>& conds);

  private:
    GenConfig cfg_;
    ParamStore<S> params_;

    Var linear(Tape<S>& tape, Var x2d, const std::string& w, const std::string& b,
               std::map<std::string, Var>& pv);
    Var attention(Tape<S>& tape, Var q_seq, Var kv_seq, const std::string& prefix,
                  std::map<std::string, Var>& pv);
    Var param_var(Tape<S>& tape, const std::string& name, std::map<std::string, Var>& pv);
};

using GenModel = GenModelT<float>;

}  // namespace bevloop::gen
