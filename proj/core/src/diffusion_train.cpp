#include "bevloop/gen/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"
#include "bevloop/scene/layout.hpp"
#include "bevloop/scene/raster.hpp"

namespace bevloop::gen {

TrainSample make_train_sample(const scene::BevScene& s, const scene::ViewConfig& vc,
                              const GenConfig& cfg, uint64_t render_seed) {
    if (vc.n_views != cfg.n_views || vc.t_frames != cfg.n_frames || vc.h != cfg.height ||
        vc.w != cfg.width)
        throw InvalidArgument("view geometry does not match generator config");
    scene::SceneRaster raster =
        s.raster ? *s.raster : scene::render_raster(s, vc, render_seed);
    TrainSample out;
    out.x0 = raster_to_tensor(raster);
    for (float& v : out.x0.data) v = to_model_space(v);
    out.cond.layout = scene::project_layout(s, vc, cfg.n_box);
    std::string text = s.caption;
    for (const std::string& k : s.keywords) text += " " + k;
    out.cond.text_tokens = scene::caption_tokens(text, cfg.text_len);
    return out;
}

namespace {

struct AdamSlot {
    Tensor<float> m, v;
};

}  // namespace

void apply_null_dropout(SceneCond& cond, Rng& rng, float rate) {
    if (rng.flip(rate)) {
        cond.null_box = cond.null_text = cond.null_road = true;
        return;
    }
    cond.null_box = cond.null_box || rng.flip(rate);
    cond.null_text = cond.null_text || rng.flip(rate);
    cond.null_road = cond.null_road || rng.flip(rate);
}

TrainReport train(GenModel& model, const std::vector<TrainSample>& data,
                  const TrainOptions& opt) {
    if (data.empty()) throw InvalidArgument("no training samples");
    const GenConfig& cfg = model.config();
    const int rows = cfg.n_views * cfg.n_frames * cfg.tokens_per_frame();
    const int pd = cfg.patch_dim();
    const size_t per_sample = Tensor<float>::count({cfg.n_views, cfg.n_frames, 3, cfg.height,
                                                    cfg.width});
    for (const TrainSample& s : data)
        if (s.x0.numel() != per_sample)
            throw InvalidArgument("training raster shape does not match generator config");

    std::map<std::string, AdamSlot> adam;
    int adam_step = 0;
    const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;

    Rng noise = Rng::derive(opt.seed, "train_noise");
    TrainReport report;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::vector<size_t> order(data.size());
        std::iota(order.begin(), order.end(), size_t(0));
        Rng shuffle = Rng::derive(opt.seed, "train_order", static_cast<uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<size_t>(shuffle.uniform_int(0, int64_t(i) - 1))]);

        float loss_sum = 0.0f;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(opt.batch));
            const int B = static_cast<int>(stop - start);
            std::vector<Tensor<float>> zt;
            std::vector<float> tvals;
            std::vector<SceneCond> conds;
            Tensor<float> target = Tensor<float>::zeros({B * rows, pd});
            for (int bi = 0; bi < B; ++bi) {
                const TrainSample& s = data[order[start + static_cast<size_t>(bi)]];
                const float t = static_cast<float>(noise.uniform());
                Tensor<float> z = s.x0;
                Tensor<float> diff = Tensor<float>::zeros(s.x0.shape);
                for (size_t i = 0; i < z.numel(); ++i) {
                    const float x1 = static_cast<float>(noise.gaussian());
                    diff.data[i] = x1 - s.x0.data[i];
                    z.data[i] = (1.0f - t) * s.x0.data[i] + t * x1;
                }
                Tensor<float> dtok = patchify(diff, cfg);
                std::copy(dtok.data.begin(), dtok.data.end(),
                          target.data.begin() + static_cast<size_t>(bi) * rows * pd);
                SceneCond cond = s.cond;
                apply_null_dropout(cond, noise, cfg.null_dropout);
                zt.push_back(std::move(z));
                tvals.push_back(t);
                conds.push_back(std::move(cond));
            }

            Tape<float> tape;
            std::map<std::string, GenModel::Var> pv;
            GenModel::Var pred = model.forward(tape, zt, tvals, conds, &pv);
            GenModel::Var loss = tape.mse(pred, target);
            tape.backward(loss);
            loss_sum += tape.val(loss).data[0];
            ++batches;

            ++adam_step;
            const float corr1 = 1.0f - std::pow(b1, static_cast<float>(adam_step));
            const float corr2 = 1.0f - std::pow(b2, static_cast<float>(adam_step));
            for (const std::string& name : model.params().order) {
                auto it = pv.find(name);
                if (it == pv.end()) continue;
                const Tensor<float>& g = tape.grad(it->second);
                Tensor<float>& p = model.params().at(name);
                AdamSlot& slot = adam[name];
                if (slot.m.data.empty()) {
                    slot.m = Tensor<float>::zeros(p.shape);
                    slot.v = Tensor<float>::zeros(p.shape);
                }
                for (size_t i = 0; i < p.numel(); ++i) {
                    const float gi = g.data[i];
                    slot.m.data[i] = b1 * slot.m.data[i] + (1.0f - b1) * gi;
                    slot.v.data[i] = b2 * slot.v.data[i] + (1.0f - b2) * gi * gi;
                    const float mhat = slot.m.data[i] / corr1;
                    const float vhat = slot.v.data[i] / corr2;
                    p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + eps);
                }
            }
        }
        report.epoch_loss.push_back(batches ? loss_sum / static_cast<float>(batches) : 0.0f);
    }
    return report;
}

}  // namespace bevloop::gen
