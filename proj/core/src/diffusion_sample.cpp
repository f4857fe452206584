#include "bevloop/gen/sample.hpp"

#include <algorithm>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"
#include "bevloop/scene/layout.hpp"
#include "bevloop/scene/raster.hpp"

namespace bevloop::gen {

std::vector<Tensor<float>> guided_velocity(GenModelT<float>& model,
                                           const std::vector<Tensor<float>>& z,
                                           const std::vector<float>& t,
                                           const std::vector<SceneCond>& conds) {
    const GenConfig& cfg = model.config();
    auto pass = [&](bool with_text, bool with_road, bool with_box) {
        std::vector<SceneCond> pc = conds;
        for (SceneCond& c : pc) {
            c.null_text = c.null_text || !with_text;
            c.null_road = c.null_road || !with_road;
            c.null_box = c.null_box || !with_box;
        }
        return model.velocity(z, t, pc);
    };
    std::vector<Tensor<float>> u1 = pass(false, false, false);
    std::vector<Tensor<float>> u2 = pass(true, false, false);
    std::vector<Tensor<float>> u3 = pass(true, true, false);
    std::vector<Tensor<float>> u4 = pass(true, true, true);
    std::vector<Tensor<float>> out;
    out.reserve(z.size());
    for (size_t b = 0; b < z.size(); ++b) {
        Tensor<float> g = u1[b];
        for (size_t i = 0; i < g.numel(); ++i)
            g.data[i] += cfg.guide_text * (u2[b].data[i] - u1[b].data[i]) +
                         cfg.guide_back * (u3[b].data[i] - u2[b].data[i]) +
                         cfg.guide_fore * (u4[b].data[i] - u3[b].data[i]);
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<Tensor<float>> sample(GenModelT<float>& model, const std::vector<SceneCond>& conds,
                                  uint64_t seed, const StepObserver& observer) {
    if (conds.empty()) throw InvalidArgument("nothing to sample");
    const GenConfig& cfg = model.config();
    Rng rng = Rng::derive(seed, "sample_noise");
    std::vector<Tensor<float>> z;
    for (size_t b = 0; b < conds.size(); ++b) {
        Tensor<float> t = Tensor<float>::zeros({cfg.n_views, cfg.n_frames, 3, cfg.height,
                                                cfg.width});
        for (float& v : t.data) v = static_cast<float>(rng.gaussian());
        z.push_back(std::move(t));
    }
    const int K = cfg.sample_steps;
    const float dt = 1.0f / static_cast<float>(K);
    for (int k = 0; k < K; ++k) {
        const float t_now = 1.0f - static_cast<float>(k) * dt;
        std::vector<float> tv(conds.size(), t_now);
        std::vector<Tensor<float>> v = guided_velocity(model, z, tv, conds);
        if (observer) observer(k, t_now, v);
        for (size_t b = 0; b < z.size(); ++b)
            for (size_t i = 0; i < z[b].numel(); ++i) z[b].data[i] -= dt * v[b].data[i];
    }
    return z;
}

Tensor<float> extend_video(GenModelT<float>& model, const SceneCond& cond,
                           const Tensor<float>& prev, uint64_t seed) {
    const GenConfig& cfg = model.config();
    const int V = cfg.n_views, T = cfg.n_frames, H = cfg.height, W = cfg.width;
    if (prev.ndim() != 5 || prev.dim(0) != V || prev.dim(1) != T || prev.dim(3) != H ||
        prev.dim(4) != W)
        throw InvalidArgument("previous clip shape does not match generator config");
    const int ov = cfg.overlap;
    const size_t frame = static_cast<size_t>(3) * H * W;

    // Conditioning frames: the tail of the previous clip becomes the head
    // of the continuation.
    std::vector<float> known(static_cast<size_t>(V) * ov * frame);
    for (int v = 0; v < V; ++v)
        for (int f = 0; f < ov; ++f)
            std::copy_n(prev.data.data() + (static_cast<size_t>(v) * T + (T - ov + f)) * frame,
                        frame, known.data() + (static_cast<size_t>(v) * ov + f) * frame);

    Rng rng = Rng::derive(seed, "extend_noise");
    Tensor<float> z = Tensor<float>::zeros({V, T, 3, H, W});
    for (float& x : z.data) x = static_cast<float>(rng.gaussian());
    std::vector<float> eps0(static_cast<size_t>(V) * ov * frame);
    for (int v = 0; v < V; ++v)
        for (int f = 0; f < ov; ++f)
            std::copy_n(z.data.data() + (static_cast<size_t>(v) * T + f) * frame, frame,
                        eps0.data() + (static_cast<size_t>(v) * ov + f) * frame);

    auto clamp_known = [&](float t_now) {
        for (int v = 0; v < V; ++v)
            for (int f = 0; f < ov; ++f) {
                float* dst = z.data.data() + (static_cast<size_t>(v) * T + f) * frame;
                const float* kx = known.data() + (static_cast<size_t>(v) * ov + f) * frame;
                const float* ke = eps0.data() + (static_cast<size_t>(v) * ov + f) * frame;
                for (size_t i = 0; i < frame; ++i)
                    dst[i] = (1.0f - t_now) * kx[i] + t_now * ke[i];
            }
    };

    const int K = cfg.sample_steps;
    const float dt = 1.0f / static_cast<float>(K);
    std::vector<SceneCond> conds{cond};
    for (int k = 0; k < K; ++k) {
        const float t_now = 1.0f - static_cast<float>(k) * dt;
        clamp_known(t_now);
        std::vector<Tensor<float>> zs{z};
        std::vector<float> tv{t_now};
        std::vector<Tensor<float>> v = guided_velocity(model, zs, tv, conds);
        for (size_t i = 0; i < z.numel(); ++i) z.data[i] -= dt * v[0].data[i];
    }
    clamp_known(0.0f);
    return z;
}

scene::SceneRaster raster_from_model(const Tensor<float>& z) {
    Tensor<float> px = z;
    for (float& v : px.data) v = to_pixel_space(v);
    return tensor_to_raster(px);
}

scene::Dataset generate_dataset(GenModelT<float>& model,
                                const std::vector<agent::Requirement>& reqs,
                                const scene::Dataset& train, const scene::ViewConfig& vc,
                                const GenerateOptions& opt) {
    const GenConfig& cfg = model.config();
    scene::Dataset out;
    out.name = "generated";
    out.provenance = "generated";
    if (train.scenes.empty()) throw InvalidArgument("empty exemplar pool");
    int serial = 0;
    char idbuf[64];
    for (size_t ri = 0; ri < reqs.size(); ++ri) {
        const agent::Requirement& req = reqs[ri];
        // Exemplars give the content; without retrieval hits fall back to a
        // deterministic walk over the pool.
        std::vector<const scene::BevScene*> pool;
        for (const std::string& id : req.retrieved) {
            const scene::BevScene* s = train.find(id);
            if (!s) throw InvalidArgument("retrieved exemplar " + id + " is not in the pool");
            pool.push_back(s);
        }
        if (pool.empty())
            for (size_t i = 0; i < train.scenes.size() && pool.size() < 3; ++i)
                pool.push_back(&train.scenes[(ri * 7 + i) % train.scenes.size()]);

        std::string req_text;
        for (const std::string& k : req.keywords)
            req_text += (req_text.empty() ? "" : " ") + k;

        for (size_t j = 0; j < pool.size(); ++j) {
            const scene::BevScene& ex = *pool[j];
            SceneCond cond;
            cond.layout = scene::project_layout(ex, vc, cfg.n_box);
            cond.text_tokens = scene::caption_tokens(req_text, cfg.text_len);
            const uint64_t sseed = hash_combine(opt.seed, hash_str(req.id) + uint64_t(j));
            std::vector<Tensor<float>> raster = sample(model, {cond}, sseed);

            scene::BevScene s = ex;
            std::snprintf(idbuf, sizeof idbuf, "%s_%04d", opt.id_prefix.c_str(), serial++);
            s.id = idbuf;
            for (const std::string& k : req.keywords)
                if (std::find(s.keywords.begin(), s.keywords.end(), k) == s.keywords.end())
                    s.keywords.push_back(k);
            s.raster = raster_from_model(raster[0]);
            out.scenes.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace bevloop::gen
