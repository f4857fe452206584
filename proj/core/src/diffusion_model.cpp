#include "bevloop/gen/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"

namespace bevloop::gen {

using nlohmann::json;

void GenConfig::validate() const {
    if (n_views <= 0 || n_frames <= 0 || height <= 0 || width <= 0 || patch <= 0)
        throw InvalidArgument("generator dims must be positive");
    if (height % patch != 0 || width % patch != 0)
        throw InvalidArgument("raster size must be divisible by the patch size");
    if (channels <= 0 || n_heads <= 0 || channels % n_heads != 0)
        throw InvalidArgument("channels must be a positive multiple of n_heads");
    if (n_blocks < 1) throw InvalidArgument("need at least one block");
    if (fourier_bands < 1) throw InvalidArgument("need at least one frequency band");
    if (n_box < 1 || text_len < 1 || vocab < 2)
        throw InvalidArgument("conditioning dims must be positive");
    if (sample_steps < 1) throw InvalidArgument("sample_steps must be positive");
    if (overlap < 1 || overlap > n_frames)
        throw InvalidArgument("overlap must be in [1, n_frames]");
    if (null_dropout < 0.0f || null_dropout >= 1.0f)
        throw InvalidArgument("null_dropout must be in [0, 1)");
}

std::string GenConfig::to_json() const {
    json j;
    j["n_views"] = n_views;
    j["n_frames"] = n_frames;
    j["height"] = height;
    j["width"] = width;
    j["patch"] = patch;
    j["channels"] = channels;
    j["n_blocks"] = n_blocks;
    j["n_heads"] = n_heads;
    j["fourier_bands"] = fourier_bands;
    j["n_box"] = n_box;
    j["text_len"] = text_len;
    j["vocab"] = vocab;
    j["sample_steps"] = sample_steps;
    j["overlap"] = overlap;
    j["guide_text"] = guide_text;
    j["guide_back"] = guide_back;
    j["guide_fore"] = guide_fore;
    j["null_dropout"] = null_dropout;
    j["lr"] = lr;
    return j.dump();
}

GenConfig GenConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ParseError("generator config is not a JSON object", 0);
    GenConfig c;
    c.n_views = j.value("n_views", c.n_views);
    c.n_frames = j.value("n_frames", c.n_frames);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.patch = j.value("patch", c.patch);
    c.channels = j.value("channels", c.channels);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.fourier_bands = j.value("fourier_bands", c.fourier_bands);
    c.n_box = j.value("n_box", c.n_box);
    c.text_len = j.value("text_len", c.text_len);
    c.vocab = j.value("vocab", c.vocab);
    c.sample_steps = j.value("sample_steps", c.sample_steps);
    c.overlap = j.value("overlap", c.overlap);
    c.guide_text = j.value("guide_text", c.guide_text);
    c.guide_back = j.value("guide_back", c.guide_back);
    c.guide_fore = j.value("guide_fore", c.guide_fore);
    c.null_dropout = j.value("null_dropout", c.null_dropout);
    c.lr = j.value("lr", c.lr);
    c.validate();
    return c;
}

template <typename S>
void fourier_embed(S x, int bands, S* out) {
    S freq = S(M_PI);
    for (int i = 0; i < bands; ++i) {
        out[2 * i] = std::sin(freq * x);
        out[2 * i + 1] = std::cos(freq * x);
        freq *= S(2);
    }
}

template void fourier_embed<float>(float, int, float*);
template void fourier_embed<double>(double, int, double*);

template <typename S>
Tensor<S> patchify(const Tensor<S>& x, const GenConfig& cfg) {
    const int V = cfg.n_views, T = cfg.n_frames, H = cfg.height, W = cfg.width, p = cfg.patch;
    const int gy = H / p, gx = W / p;
    if (x.ndim() != 5 || x.dim(0) != V || x.dim(1) != T || x.dim(2) != 3 || x.dim(3) != H ||
        x.dim(4) != W)
        throw InvalidArgument("patchify input shape " + x.shape_str() + " does not match config");
    Tensor<S> out = Tensor<S>::zeros({V * T * gy * gx, 3 * p * p});
    size_t row = 0;
    for (int v = 0; v < V; ++v)
        for (int t = 0; t < T; ++t)
            for (int py = 0; py < gy; ++py)
                for (int px = 0; px < gx; ++px, ++row) {
                    S* dst = out.data.data() + row * static_cast<size_t>(3 * p * p);
                    for (int c = 0; c < 3; ++c)
                        for (int dy = 0; dy < p; ++dy)
                            for (int dx = 0; dx < p; ++dx)
                                *dst++ = x.data[(((static_cast<size_t>(v) * T + t) * 3 + c) * H +
                                                 py * p + dy) *
                                                    W +
                                                px * p + dx];
                }
    return out;
}

template <typename S>
Tensor<S> unpatchify(const Tensor<S>& tokens, const GenConfig& cfg) {
    const int V = cfg.n_views, T = cfg.n_frames, H = cfg.height, W = cfg.width, p = cfg.patch;
    const int gy = H / p, gx = W / p;
    if (tokens.ndim() != 2 || tokens.dim(0) != V * T * gy * gx || tokens.dim(1) != 3 * p * p)
        throw InvalidArgument("unpatchify input shape " + tokens.shape_str() +
                              " does not match config");
    Tensor<S> out = Tensor<S>::zeros({V, T, 3, H, W});
    size_t row = 0;
    for (int v = 0; v < V; ++v)
        for (int t = 0; t < T; ++t)
            for (int py = 0; py < gy; ++py)
                for (int px = 0; px < gx; ++px, ++row) {
                    const S* src = tokens.data.data() + row * static_cast<size_t>(tokens.dim(1));
                    for (int c = 0; c < 3; ++c)
                        for (int dy = 0; dy < p; ++dy)
                            for (int dx = 0; dx < p; ++dx)
                                out.data[(((static_cast<size_t>(v) * T + t) * 3 + c) * H + py * p +
                                          dy) *
                                             W +
                                         px * p + dx] = *src++;
                }
    return out;
}

template Tensor<float> patchify<float>(const Tensor<float>&, const GenConfig&);
template Tensor<double> patchify<double>(const Tensor<double>&, const GenConfig&);
template Tensor<float> unpatchify<float>(const Tensor<float>&, const GenConfig&);
template Tensor<double> unpatchify<double>(const Tensor<double>&, const GenConfig&);

Tensor<float> raster_to_tensor(const scene::SceneRaster& r) {
    if (r.channels != 3) throw InvalidArgument("raster tensor needs 3 channels");
    Tensor<float> t;
    t.shape = {r.n_views, r.n_frames, r.channels, r.h, r.w};
    t.data = r.values;
    if (t.data.size() != Tensor<float>::count(t.shape))
        throw InvalidArgument("raster value count does not match its dims");
    return t;
}

scene::SceneRaster tensor_to_raster(const Tensor<float>& t) {
    if (t.ndim() != 5) throw InvalidArgument("raster tensor must be 5-d");
    scene::SceneRaster r;
    r.n_views = t.dim(0);
    r.n_frames = t.dim(1);
    r.channels = t.dim(2);
    r.h = t.dim(3);
    r.w = t.dim(4);
    r.values = t.data;
    return r;
}

template <typename S>
Tensor<S>& ParamStore<S>::create(const std::string& name, std::vector<int> shape, uint64_t seed,
                                 S scale) {
    if (tensors.count(name)) throw InvalidArgument("duplicate parameter " + name);
    Tensor<S> t = Tensor<S>::zeros(shape);
    if (scale != S(0)) {
        Rng rng = Rng::derive(seed, name);
        for (S& x : t.data) x = S(rng.gaussian()) * scale;
    }
    order.push_back(name);
    return tensors.emplace(name, std::move(t)).first->second;
}

template <typename S>
Tensor<S>& ParamStore<S>::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InvalidArgument("unknown parameter " + name);
    return it->second;
}

template <typename S>
const Tensor<S>& ParamStore<S>::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw InvalidArgument("unknown parameter " + name);
    return it->second;
}

template <typename S>
size_t ParamStore<S>::total_scalars() const {
    size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.numel();
    return n;
}

template struct ParamStore<float>;
template struct ParamStore<double>;

namespace {

// Suffixes of one transformer block's parameters, in creation order.
const char* const kBlockParams[] = {
    "ln1_g", "ln1_b", "t_q_w", "t_q_b", "t_k_w", "t_k_b", "t_v_w", "t_v_b", "t_o_w", "t_o_b",
    "ln2_g", "ln2_b", "s_q_w", "s_q_b", "s_k_w", "s_k_b", "s_v_w", "s_v_b", "s_o_w", "s_o_b",
    "ln3_g", "ln3_b", "x_q_w", "x_q_b", "x_k_w", "x_k_b", "x_v_w", "x_v_b", "x_o_w", "x_o_b",
    "ln4_g", "ln4_b", "ff1_w", "ff1_b", "ff2_w", "ff2_b",
};

template <typename S>
void create_block_params(ParamStore<S>& ps, const std::string& prefix, int C, uint64_t seed) {
    const S wsc = S(1) / std::sqrt(S(C));
    auto lin = [&](const std::string& stem, int in, int out) {
        ps.create(prefix + stem + "_w", {in, out}, seed, S(1) / std::sqrt(S(in)));
        ps.create(prefix + stem + "_b", {out}, seed, S(0));
    };
    auto ln = [&](const std::string& stem) {
        Tensor<S>& g = ps.create(prefix + stem + "_g", {C}, seed, S(0));
        std::fill(g.data.begin(), g.data.end(), S(1));
        ps.create(prefix + stem + "_b", {C}, seed, S(0));
    };
    (void)wsc;
    ln("ln1");
    for (const char* a : {"t_q", "t_k", "t_v", "t_o"}) lin(a, C, C);
    ln("ln2");
    for (const char* a : {"s_q", "s_k", "s_v", "s_o"}) lin(a, C, C);
    ln("ln3");
    for (const char* a : {"x_q", "x_k", "x_v", "x_o"}) lin(a, C, C);
    ln("ln4");
    lin("ff1", C, 4 * C);
    lin("ff2", 4 * C, C);
}

}  // namespace

template <typename S>
GenModelT<S>::GenModelT(const GenConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const int C = cfg_.channels;
    const int pd = cfg_.patch_dim();
    const int fb = 2 * cfg_.fourier_bands;
    auto lin = [&](const std::string& stem, int in, int out) {
        params_.create(stem + "_w", {in, out}, seed, S(1) / std::sqrt(S(in)));
        params_.create(stem + "_b", {out}, seed, S(0));
    };
    lin("patch", pd, C);
    // One learned position per (frame, patch) slot, shared across views so
    // reordering views only reorders the output.
    params_.create("patch_pos", {cfg_.n_frames * cfg_.tokens_per_frame(), C}, seed, S(0.02));
    lin("time", fb, C);
    lin("road", pd, C);
    lin("box_b", 4 * fb, C);
    lin("box_m", fb, C);
    lin("box_u", fb, C);
    params_.create("box_tok", {cfg_.vocab, C}, seed, S(0.02));
    lin("box_mlp1", C, C);
    lin("box_mlp2", C, C);
    params_.create("box_null", {1, C}, seed, S(0.02));
    params_.create("text_tok", {cfg_.vocab, C}, seed, S(0.02));
    params_.create("text_pos", {cfg_.text_len, C}, seed, S(0.02));
    params_.create("text_null", {1, C}, seed, S(0.02));
    for (int i = 0; i < cfg_.n_blocks; ++i)
        create_block_params(params_, "blk" + std::to_string(i) + "_", C, seed);
    for (int i = 0; i < cfg_.n_control(); ++i) {
        const std::string cp = "ctl" + std::to_string(i) + "_";
        const std::string bp = "blk" + std::to_string(i) + "_";
        create_block_params(params_, cp, C, seed);
        // Control blocks start as exact copies of the base blocks they tap.
        for (const char* sfx : kBlockParams) params_.at(cp + sfx).data = params_.at(bp + sfx).data;
        params_.create(cp + "zero_w", {C, C}, seed, S(0));
        params_.create(cp + "zero_b", {C}, seed, S(0));
    }
    Tensor<S>& hg = params_.create("head_ln_g", {C}, seed, S(0));
    std::fill(hg.data.begin(), hg.data.end(), S(1));
    params_.create("head_ln_b", {C}, seed, S(0));
    lin("head", C, pd);
}

template <typename S>
typename GenModelT<S>::Var GenModelT<S>::param_var(Tape<S>& tape, const std::string& name,
                                                   std::map<std::string, Var>& pv) {
    auto it = pv.find(name);
    if (it != pv.end()) return it->second;
    Var v = tape.input(params_.at(name));
    pv.emplace(name, v);
    return v;
}

template <typename S>
typename GenModelT<S>::Var GenModelT<S>::linear(Tape<S>& tape, Var x2d, const std::string& w,
                                                const std::string& b,
                                                std::map<std::string, Var>& pv) {
    Var y = tape.matmul(x2d, param_var(tape, w, pv));
    return tape.row_broadcast_add(y, param_var(tape, b, pv));
}

template <typename S>
typename GenModelT<S>::Var GenModelT<S>::attention(Tape<S>& tape, Var q_seq, Var kv_seq,
                                                   const std::string& prefix,
                                                   std::map<std::string, Var>& pv) {
    const int G = tape.val(q_seq).dim(0);
    const int Lq = tape.val(q_seq).dim(1);
    const int Lk = tape.val(kv_seq).dim(1);
    const int C = cfg_.channels, nh = cfg_.n_heads, dh = C / nh;
    Var q2 = linear(tape, tape.reshape(q_seq, {G * Lq, C}), prefix + "q_w", prefix + "q_b", pv);
    Var k2 = linear(tape, tape.reshape(kv_seq, {G * Lk, C}), prefix + "k_w", prefix + "k_b", pv);
    Var v2 = linear(tape, tape.reshape(kv_seq, {G * Lk, C}), prefix + "v_w", prefix + "v_b", pv);
    auto heads = [&](Var x, int Lx) {
        Var h4 = tape.reshape(x, {G, Lx, nh, dh});
        return tape.reshape(tape.permute(h4, {0, 2, 1, 3}), {G * nh, Lx, dh});
    };
    Var qh = heads(q2, Lq), kh = heads(k2, Lk), vh = heads(v2, Lk);
    Var scores = tape.scale(tape.bmm_nt(qh, kh), S(1) / std::sqrt(S(dh)));
    Var attn = tape.softmax_lastdim(scores);
    Var ctx = tape.bmm(attn, vh);
    Var merged = tape.reshape(tape.permute(tape.reshape(ctx, {G, nh, Lq, dh}), {0, 2, 1, 3}),
                              {G * Lq, C});
    Var o = linear(tape, merged, prefix + "o_w", prefix + "o_b", pv);
    return tape.reshape(o, {G, Lq, C});
}

template <typename S>
typename GenModelT<S>::Var GenModelT<S>::forward(Tape<S>& tape, const std::vector<Tensor<S>>& z,
                                                 const std::vector<S>& t,
                                                 const std::vector<SceneCond>& conds,
                                                 std::map<std::string, Var>* param_vars) {
    const int B = static_cast<int>(z.size());
    if (B == 0) throw InvalidArgument("empty batch");
    if (t.size() != z.size() || conds.size() != z.size())
        throw InvalidArgument("batch, times and conditioning must align");
    const int V = cfg_.n_views, T = cfg_.n_frames, Sp = cfg_.tokens_per_frame();
    const int C = cfg_.channels, pd = cfg_.patch_dim(), L = cfg_.text_len, nb = cfg_.n_box;
    const int fb = 2 * cfg_.fourier_bands;
    const int N = B * V * T * Sp;

    std::map<std::string, Var> local_pv;
    std::map<std::string, Var>& pv = param_vars ? *param_vars : local_pv;

    // Raster tokens plus per-sample time features, built host-side.
    Tensor<S> X = Tensor<S>::zeros({N, pd});
    for (int b = 0; b < B; ++b) {
        Tensor<S> tok = patchify(z[static_cast<size_t>(b)], cfg_);
        std::copy(tok.data.begin(), tok.data.end(),
                  X.data.begin() + static_cast<size_t>(b) * V * T * Sp * pd);
    }
    Tensor<S> TE = Tensor<S>::zeros({B, fb});
    for (int b = 0; b < B; ++b)
        fourier_embed(t[static_cast<size_t>(b)], cfg_.fourier_bands,
                      TE.data.data() + static_cast<size_t>(b) * fb);

    Var h = linear(tape, tape.input(std::move(X)), "patch_w", "patch_b", pv);
    Var ppos = tape.reshape(
        tape.repeat_interleave0(
            tape.reshape(param_var(tape, "patch_pos", pv), {1, T * Sp, C}), B * V),
        {N, C});
    h = tape.add(h, ppos);
    Var trow = linear(tape, tape.input(std::move(TE)), "time_w", "time_b", pv);
    h = tape.add(h, tape.repeat_interleave0(trow, V * T * Sp));

    // Road conditioning: same patch grid over the map raster, zero
    // contribution for samples that null it out.
    Tensor<S> R = Tensor<S>::zeros({N, pd});
    std::vector<uint8_t> road_keep(static_cast<size_t>(N), 1);
    for (int b = 0; b < B; ++b) {
        const SceneCond& cond = conds[static_cast<size_t>(b)];
        const scene::SceneRaster& back = cond.layout.back;
        if (!cond.null_road && back.size() > 0) {
            Tensor<S> bt = Tensor<S>::zeros({V, T, 3, cfg_.height, cfg_.width});
            if (back.n_views != V || back.n_frames != T || back.channels != 3 ||
                back.h != cfg_.height || back.w != cfg_.width)
                throw InvalidArgument("map raster shape does not match generator config");
            for (size_t i = 0; i < bt.numel(); ++i) bt.data[i] = S(back.values[i]);
            Tensor<S> rt = patchify(bt, cfg_);
            std::copy(rt.data.begin(), rt.data.end(),
                      R.data.begin() + static_cast<size_t>(b) * V * T * Sp * pd);
        }
        if (cond.null_road)
            std::fill_n(road_keep.begin() + static_cast<size_t>(b) * V * T * Sp,
                        static_cast<size_t>(V) * T * Sp, uint8_t(0));
    }
    Var road = tape.mask_rows(linear(tape, tape.input(std::move(R)), "road_w", "road_b", pv),
                              std::move(road_keep));

    // Box conditioning: frequency features of geometry plus a token
    // embedding, mixed by a small mlp. Padded slots contribute nothing;
    // nulled samples read the learned null row in every slot.
    const int NB = B * V * T * nb;
    Tensor<S> BF = Tensor<S>::zeros({NB, 4 * fb});
    Tensor<S> MF = Tensor<S>::zeros({NB, fb});
    Tensor<S> UF = Tensor<S>::zeros({NB, fb});
    std::vector<int> box_ids(static_cast<size_t>(NB), 0);
    std::vector<uint8_t> box_keep(static_cast<size_t>(NB), 0);
    std::vector<uint8_t> box_null(static_cast<size_t>(NB), 0);
    for (int b = 0; b < B; ++b) {
        const SceneCond& cond = conds[static_cast<size_t>(b)];
        const scene::ProjectedLayout& lay = cond.layout;
        const bool have = lay.n_views == V && lay.n_frames == T && lay.n_box == nb;
        if (!cond.null_box && !lay.slots.empty() && !have)
            throw InvalidArgument("projected layout does not match generator config");
        for (int v = 0; v < V; ++v)
            for (int f = 0; f < T; ++f)
                for (int n = 0; n < nb; ++n) {
                    const size_t r = ((static_cast<size_t>(b) * V + v) * T + f) * nb + n;
                    if (cond.null_box) {
                        box_null[r] = 1;
                        continue;
                    }
                    if (!have) continue;
                    const scene::BoxSlot& slot = lay.at(v, f, n);
                    if (!slot.valid) continue;
                    box_keep[r] = 1;
                    for (int j = 0; j < 4; ++j)
                        fourier_embed(S(slot.b[j]), cfg_.fourier_bands,
                                      BF.data.data() + r * 4 * fb + j * fb);
                    fourier_embed(S(slot.heading_deg / 180.0f), cfg_.fourier_bands,
                                  MF.data.data() + r * fb);
                    fourier_embed(S(slot.id01), cfg_.fourier_bands, UF.data.data() + r * fb);
                    box_ids[r] = std::clamp(slot.token, 0, cfg_.vocab - 1);
                }
    }
    Var brepr = tape.add(linear(tape, tape.input(std::move(BF)), "box_b_w", "box_b_b", pv),
                         linear(tape, tape.input(std::move(MF)), "box_m_w", "box_m_b", pv));
    brepr = tape.add(brepr, linear(tape, tape.input(std::move(UF)), "box_u_w", "box_u_b", pv));
    brepr = tape.add(brepr, tape.embed(param_var(tape, "box_tok", pv), std::move(box_ids)));
    Var bmlp = linear(tape, tape.gelu(linear(tape, brepr, "box_mlp1_w", "box_mlp1_b", pv)),
                      "box_mlp2_w", "box_mlp2_b", pv);
    Var bnull = tape.repeat_interleave0(param_var(tape, "box_null", pv), NB);
    Var box_cond = tape.add(tape.mask_rows(bmlp, std::move(box_keep)),
                            tape.mask_rows(bnull, std::move(box_null)));

    // Text conditioning: token embedding plus learned positions, or the
    // learned null row when the caption is dropped.
    std::vector<int> text_ids(static_cast<size_t>(B) * L, 0);
    std::vector<uint8_t> text_keep(static_cast<size_t>(B) * L, 0);
    std::vector<uint8_t> text_null(static_cast<size_t>(B) * L, 0);
    for (int b = 0; b < B; ++b) {
        const SceneCond& cond = conds[static_cast<size_t>(b)];
        for (int l = 0; l < L; ++l) {
            const size_t r = static_cast<size_t>(b) * L + l;
            if (cond.null_text) {
                text_null[r] = 1;
                continue;
            }
            text_keep[r] = 1;
            if (l < static_cast<int>(cond.text_tokens.size())) {
                const int id = cond.text_tokens[static_cast<size_t>(l)];
                if (id < 0 || id >= cfg_.vocab) throw InvalidArgument("caption token out of range");
                text_ids[r] = id;
            }
        }
    }
    Var temb = tape.embed(param_var(tape, "text_tok", pv), std::move(text_ids));
    Var tpos = tape.reshape(
        tape.repeat_interleave0(
            tape.reshape(param_var(tape, "text_pos", pv), {1, L, C}), B),
        {B * L, C});
    Var tnull = tape.repeat_interleave0(param_var(tape, "text_null", pv), B * L);
    Var text_cond = tape.add(tape.mask_rows(tape.add(temb, tpos), std::move(text_keep)),
                             tape.mask_rows(tnull, std::move(text_null)));

    // Cross-attention memory: box slots then caption tokens, tiled to every
    // (sample, view, frame) group.
    Var kv = tape.concat(
        tape.reshape(box_cond, {B * V * T, nb, C}),
        tape.repeat_interleave0(tape.reshape(text_cond, {B, L, C}), V * T), 1);

    auto run_block = [&](Var x, const std::string& prefix) {
        // Attention along time within one patch position.
        Var n1 = tape.layernorm(x, param_var(tape, prefix + "ln1_g", pv),
                                param_var(tape, prefix + "ln1_b", pv));
        Var seq_t = tape.reshape(
            tape.permute(tape.reshape(n1, {B, V, T, Sp, C}), {0, 1, 3, 2, 4}),
            {B * V * Sp, T, C});
        Var at = attention(tape, seq_t, seq_t, prefix + "t_", pv);
        Var back_t = tape.reshape(
            tape.permute(tape.reshape(at, {B, V, Sp, T, C}), {0, 1, 3, 2, 4}), {N, C});
        x = tape.add(x, back_t);

        // Attention across every view of one frame.
        Var n2 = tape.layernorm(x, param_var(tape, prefix + "ln2_g", pv),
                                param_var(tape, prefix + "ln2_b", pv));
        Var seq_s = tape.reshape(
            tape.permute(tape.reshape(n2, {B, V, T, Sp, C}), {0, 2, 1, 3, 4}),
            {B * T, V * Sp, C});
        Var as = attention(tape, seq_s, seq_s, prefix + "s_", pv);
        Var back_s = tape.reshape(
            tape.permute(tape.reshape(as, {B, T, V, Sp, C}), {0, 2, 1, 3, 4}), {N, C});
        x = tape.add(x, back_s);

        // Cross-attention into the conditioning memory.
        Var n3 = tape.layernorm(x, param_var(tape, prefix + "ln3_g", pv),
                                param_var(tape, prefix + "ln3_b", pv));
        Var ax = attention(tape, tape.reshape(n3, {B * V * T, Sp, C}), kv, prefix + "x_", pv);
        x = tape.add(x, tape.reshape(ax, {N, C}));

        Var n4 = tape.layernorm(x, param_var(tape, prefix + "ln4_g", pv),
                                param_var(tape, prefix + "ln4_b", pv));
        Var ff = linear(tape, tape.gelu(linear(tape, n4, prefix + "ff1_w", prefix + "ff1_b", pv)),
                        prefix + "ff2_w", prefix + "ff2_b", pv);
        return tape.add(x, ff);
    };

    Var c = tape.add(h, road);
    const int n_ctrl = cfg_.n_control();
    for (int i = 0; i < cfg_.n_blocks; ++i) {
        const std::string bp = "blk" + std::to_string(i) + "_";
        Var hb = run_block(h, bp);
        if (i < n_ctrl) {
            const std::string cp = "ctl" + std::to_string(i) + "_";
            c = run_block(c, cp);
            Var zc = linear(tape, c, cp + "zero_w", cp + "zero_b", pv);
            hb = tape.add(hb, zc);
        }
        h = hb;
    }

    Var hn = tape.layernorm(h, param_var(tape, "head_ln_g", pv), param_var(tape, "head_ln_b", pv));
    return linear(tape, hn, "head_w", "head_b", pv);
}

template <typename S>
std::vector<Tensor<S>> GenModelT<S>::velocity(const std::vector<Tensor<S>>& z,
                                              const std::vector<S>& t,
                                              const std::vector<SceneCond>& conds) {
    Tape<S> tape;
    Var out = forward(tape, z, t, conds);
    const Tensor<S>& tok = tape.val(out);
    const int rows = cfg_.n_views * cfg_.n_frames * cfg_.tokens_per_frame();
    const int pd = cfg_.patch_dim();
    std::vector<Tensor<S>> result;
    for (size_t b = 0; b < z.size(); ++b) {
        Tensor<S> slice = Tensor<S>::zeros({rows, pd});
        std::copy_n(tok.data.data() + b * static_cast<size_t>(rows) * pd,
                    static_cast<size_t>(rows) * pd, slice.data.data());
        result.push_back(unpatchify(slice, cfg_));
    }
    return result;
}

template class GenModelT<float>;
template class GenModelT<double>;

}  // namespace bevloop::gen
