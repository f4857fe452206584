#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bevloop/common/rng.hpp"
#include "bevloop/gen/checkpoint.hpp"
#include "bevloop/gen/model.hpp"
#include "bevloop/gen/sample.hpp"
#include "bevloop/gen/tape.hpp"
#include "bevloop/gen/train.hpp"
#include "bevloop/scene/layout.hpp"
#include "bevloop/scene/types.hpp"

using namespace bevloop;
using gen::GenConfig;
using gen::SceneCond;
using gen::Tensor;

namespace {

GenConfig tiny_config() {
    GenConfig cfg;
    cfg.n_views = 1;
    cfg.n_frames = 2;
    cfg.height = 8;
    cfg.width = 8;
    cfg.patch = 4;
    cfg.channels = 8;
    cfg.n_blocks = 2;
    cfg.n_heads = 2;
    cfg.fourier_bands = 2;
    cfg.n_box = 2;
    cfg.text_len = 4;
    cfg.sample_steps = 4;
    cfg.overlap = 1;
    return cfg;
}

scene::BevScene tiny_scene() {
    scene::BevScene s;
    s.id = "tiny";
    s.caption = "a car cutting in ahead";
    s.keywords = {"cut_in"};
    s.ego.poses.resize(2);
    for (size_t i = 0; i < s.ego.poses.size(); ++i) s.ego.poses[i].x = float(i);
    scene::ObjectBox car;
    car.instance_id = 3;
    car.dense_caption = "silver sedan";
    car.traj.poses.resize(2);
    for (auto& p : car.traj.poses) { p.x = 5.0f; p.y = 0.0f; }
    s.objects.push_back(car);
    scene::MapLayer lane;
    lane.polylines.push_back({{-2.0f, 0.0f, 0.0f}, {12.0f, 0.0f, 0.0f}});
    s.map.push_back(lane);
    return s;
}

SceneCond tiny_cond(const GenConfig& cfg) {
    const scene::ViewConfig vc =
        scene::ViewConfig::front_arc(cfg.n_views, 50.0f, cfg.height, cfg.width, 2.0f,
                                     cfg.n_frames);
    return gen::make_train_sample(tiny_scene(), vc, cfg, 7).cond;
}

template <typename S>
Tensor<S> random_tensor(std::vector<int> shape, uint64_t seed) {
    Tensor<S> t = Tensor<S>::zeros(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = S(rng.gaussian());
    return t;
}

}  // namespace

TEST_CASE("fourier features interleave sine and cosine") {
    float out[8];
    gen::fourier_embed(0.0f, 4, out);
    for (int i = 0; i < 8; i += 2) {
        CHECK(out[i] == doctest::Approx(0.0f));
        CHECK(out[i + 1] == doctest::Approx(1.0f));
    }
    // Band 0 has period 2.
    float a[4], b[4];
    gen::fourier_embed(0.3f, 2, a);
    gen::fourier_embed(2.3f, 2, b);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-5));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-5));
    CHECK(a[0] == doctest::Approx(std::sin(0.3 * 3.14159265358979)).epsilon(1e-5));
}

TEST_CASE("patchify and unpatchify invert each other") {
    GenConfig cfg = tiny_config();
    Tensor<float> x = random_tensor<float>({cfg.n_views, cfg.n_frames, 3, cfg.height,
                                            cfg.width}, 5);
    Tensor<float> tok = gen::patchify(x, cfg);
    CHECK(tok.dim(0) == cfg.n_views * cfg.n_frames * cfg.tokens_per_frame());
    CHECK(tok.dim(1) == cfg.patch_dim());
    Tensor<float> back = gen::unpatchify(tok, cfg);
    REQUIRE(back.numel() == x.numel());
    for (size_t i = 0; i < x.numel(); ++i) CHECK(back.data[i] == x.data[i]);

    // A single lit pixel lands in exactly one token, channel-major.
    Tensor<float> one = Tensor<float>::zeros({cfg.n_views, cfg.n_frames, 3, cfg.height,
                                              cfg.width});
    // Frame 1, channel 2, pixel (5, 6): patch row 1, patch col 1.
    one.data[((((0 * cfg.n_frames) + 1) * 3 + 2) * cfg.height + 5) * cfg.width + 6] = 1.0f;
    Tensor<float> t1 = gen::patchify(one, cfg);
    const int gy = cfg.height / cfg.patch, gx = cfg.width / cfg.patch;
    const int row = (1 * gy + 1) * gx + 1;
    const int feat = (2 * cfg.patch + (5 % cfg.patch)) * cfg.patch + (6 % cfg.patch);
    for (int r = 0; r < t1.dim(0); ++r)
        for (int f = 0; f < t1.dim(1); ++f) {
            const float v = t1.data[size_t(r) * t1.dim(1) + f];
            if (r == row && f == feat)
                CHECK(v == 1.0f);
            else
                CHECK(v == 0.0f);
        }
}

TEST_CASE("config validation rejects inconsistent dims") {
    GenConfig bad = tiny_config();
    bad.height = 10;  // not divisible by patch 4
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = tiny_config();
    bad.channels = 9;  // not a multiple of heads
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = tiny_config();
    bad.overlap = 3;  // exceeds n_frames
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);

    GenConfig cfg = tiny_config();
    auto echo = GenConfig::from_json(cfg.to_json());
    CHECK(echo.n_views == cfg.n_views);
    CHECK(echo.n_frames == cfg.n_frames);
    CHECK(echo.channels == cfg.channels);
    CHECK(echo.guide_fore == doctest::Approx(cfg.guide_fore));
    CHECK(echo.null_dropout == doctest::Approx(cfg.null_dropout));
}

TEST_CASE("model gradients match central finite differences") {
    GenConfig cfg = tiny_config();
    gen::GenModelT<double> model(cfg, 17);
    SceneCond cond = tiny_cond(cfg);
    REQUIRE(!cond.layout.slots.empty());

    const int rows = cfg.n_views * cfg.n_frames * cfg.tokens_per_frame();
    std::vector<Tensor<double>> z{random_tensor<double>(
        {cfg.n_views, cfg.n_frames, 3, cfg.height, cfg.width}, 23)};
    Tensor<double> target = random_tensor<double>({rows, cfg.patch_dim()}, 29);
    const std::vector<double> tv{0.37};

    auto loss_value = [&]() {
        gen::Tape<double> tape;
        auto out = model.forward(tape, z, tv, {cond});
        return tape.val(tape.mse(out, target)).data[0];
    };

    gen::Tape<double> tape;
    std::map<std::string, gen::Tape<double>::Var> pv;
    auto out = model.forward(tape, z, tv, {cond}, &pv);
    auto loss = tape.mse(out, target);
    tape.backward(loss);

    const double h = 1e-6;
    for (const char* name : {"patch_w", "patch_pos", "time_w", "road_w", "box_mlp2_w",
                             "text_tok", "blk0_t_q_w", "blk1_ff1_w", "ctl0_zero_w", "head_w",
                             "head_ln_g"}) {
        REQUIRE(pv.count(name));
        const Tensor<double>& g = tape.grad(pv.at(name));
        Tensor<double>& p = model.params().at(name);
        for (size_t k : {size_t(0), p.numel() / 2}) {
            const double keep = p.data[k];
            p.data[k] = keep + h;
            const double lp = loss_value();
            p.data[k] = keep - h;
            const double lm = loss_value();
            p.data[k] = keep;
            const double fd = (lp - lm) / (2 * h);
            const double got = g.data[k];
            if (std::abs(fd) < 1e-10) {
                CHECK(std::abs(got) < 1e-8);
            } else {
                CHECK(std::abs(got - fd) / std::abs(fd) < 1e-4);
            }
        }
    }
}

TEST_CASE("control branch contributes nothing at initialization") {
    GenConfig cfg = tiny_config();
    gen::GenModelT<float> model(cfg, 3);
    SceneCond with_road = tiny_cond(cfg);
    SceneCond no_road = with_road;
    no_road.null_road = true;

    std::vector<Tensor<float>> z{random_tensor<float>(
        {cfg.n_views, cfg.n_frames, 3, cfg.height, cfg.width}, 11)};
    auto a = model.velocity(z, {0.5f}, {with_road});
    auto b = model.velocity(z, {0.5f}, {no_road});
    REQUIRE(a.size() == 1);
    for (size_t i = 0; i < a[0].numel(); ++i) CHECK(a[0].data[i] == b[0].data[i]);
}

TEST_CASE("swapping views swaps the prediction") {
    GenConfig cfg = tiny_config();
    cfg.n_views = 2;
    cfg.channels = 16;
    cfg.n_heads = 4;
    gen::GenModelT<float> model(cfg, 19);

    SceneCond cond;
    cond.null_box = cond.null_text = cond.null_road = true;
    Tensor<float> z = random_tensor<float>({2, cfg.n_frames, 3, cfg.height, cfg.width}, 31);
    Tensor<float> swapped = z;
    const size_t half = z.numel() / 2;
    std::copy(z.data.begin() + long(half), z.data.end(), swapped.data.begin());
    std::copy(z.data.begin(), z.data.begin() + long(half), swapped.data.begin() + long(half));

    auto a = model.velocity({z}, {0.6f}, {cond});
    auto b = model.velocity({swapped}, {0.6f}, {cond});
    REQUIRE(a[0].numel() == b[0].numel());
    for (size_t i = 0; i < half; ++i) {
        CHECK(a[0].data[i] == doctest::Approx(b[0].data[half + i]).epsilon(1e-4));
        CHECK(a[0].data[half + i] == doctest::Approx(b[0].data[i]).epsilon(1e-4));
    }
}

TEST_CASE("one scene overfits to half the starting loss") {
    GenConfig cfg;
    cfg.n_views = 1;
    cfg.n_frames = 2;
    cfg.height = 12;
    cfg.width = 12;
    cfg.patch = 4;
    cfg.channels = 64;
    cfg.n_blocks = 2;
    cfg.n_heads = 4;
    cfg.lr = 5e-3f;
    gen::GenModelT<float> model(cfg, 41);

    const scene::ViewConfig vc =
        scene::ViewConfig::front_arc(1, 50.0f, cfg.height, cfg.width, 2.0f, cfg.n_frames);
    std::vector<gen::TrainSample> data{gen::make_train_sample(tiny_scene(), vc, cfg, 7)};

    gen::TrainOptions opt;
    opt.epochs = 200;
    opt.batch = 1;
    opt.seed = 2;
    auto report = gen::train(model, data, opt);
    REQUIRE(report.epoch_loss.size() == 200);
    // Single-draw losses are noisy; compare a settled tail average to the
    // first epochs.
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) head += report.epoch_loss[size_t(i)];
    for (int i = 190; i < 200; ++i) tail += report.epoch_loss[size_t(i)];
    CHECK(tail < 0.5 * head);
}

TEST_CASE("epoch count zero leaves the model untouched") {
    GenConfig cfg = tiny_config();
    gen::GenModelT<float> model(cfg, 13);
    const scene::ViewConfig vc =
        scene::ViewConfig::front_arc(cfg.n_views, 50.0f, cfg.height, cfg.width, 2.0f,
                                     cfg.n_frames);
    std::vector<gen::TrainSample> data{gen::make_train_sample(tiny_scene(), vc, cfg, 7)};

    const std::string dir = (std::filesystem::temp_directory_path() / "gen_ckpt").string();
    std::filesystem::create_directories(dir);
    gen::save_checkpoint(model, dir + "/before.ckpt");
    gen::TrainOptions opt;
    opt.epochs = 0;
    auto report = gen::train(model, data, opt);
    CHECK(report.epoch_loss.empty());
    gen::save_checkpoint(model, dir + "/after.ckpt");

    std::ifstream fa(dir + "/before.ckpt", std::ios::binary);
    std::ifstream fb(dir + "/after.ckpt", std::ios::binary);
    std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
}

TEST_CASE("null dropout rates land at the configured frequency") {
    Rng rng(99);
    const int n = 10000;
    int all_null = 0, box_only = 0, considered = 0;
    for (int i = 0; i < n; ++i) {
        SceneCond cond;
        gen::apply_null_dropout(cond, rng, 0.05f);
        const bool all = cond.null_box && cond.null_text && cond.null_road;
        if (all) {
            ++all_null;
            continue;
        }
        ++considered;
        if (cond.null_box) ++box_only;
    }
    CHECK(std::abs(double(all_null) / n - 0.05) < 0.01);
    CHECK(std::abs(double(box_only) / considered - 0.05) < 0.01);
}

TEST_CASE("guidance gains of one collapse to the conditional pass") {
    GenConfig cfg = tiny_config();
    cfg.guide_text = cfg.guide_back = cfg.guide_fore = 1.0f;
    gen::GenModelT<float> model(cfg, 53);
    SceneCond cond = tiny_cond(cfg);
    std::vector<Tensor<float>> z{random_tensor<float>(
        {cfg.n_views, cfg.n_frames, 3, cfg.height, cfg.width}, 61)};

    auto guided = gen::guided_velocity(model, z, {0.4f}, {cond});
    auto plain = model.velocity(z, {0.4f}, {cond});
    REQUIRE(guided.size() == 1);
    for (size_t i = 0; i < plain[0].numel(); ++i)
        CHECK(guided[0].data[i] == doctest::Approx(plain[0].data[i]).epsilon(1e-5));
}

TEST_CASE("sampling is seed deterministic and walks the announced schedule") {
    GenConfig cfg = tiny_config();
    gen::GenModelT<float> model(cfg, 67);
    SceneCond cond = tiny_cond(cfg);

    std::vector<float> times;
    auto a = gen::sample(model, {cond}, 5,
                         [&](int, float t, const std::vector<Tensor<float>>&) {
                             times.push_back(t);
                         });
    auto b = gen::sample(model, {cond}, 5);
    auto c = gen::sample(model, {cond}, 6);
    REQUIRE(times.size() == size_t(cfg.sample_steps));
    CHECK(times.front() == doctest::Approx(1.0f));
    CHECK(std::is_sorted(times.rbegin(), times.rend()));

    bool differs = false;
    for (size_t i = 0; i < a[0].numel(); ++i) {
        CHECK(a[0].data[i] == b[0].data[i]);
        if (a[0].data[i] != c[0].data[i]) differs = true;
    }
    CHECK(differs);

    scene::SceneRaster r = gen::raster_from_model(a[0]);
    for (float v : r.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("extension keeps the overlap frames bit for bit") {
    GenConfig cfg = tiny_config();
    cfg.overlap = 1;
    gen::GenModelT<float> model(cfg, 71);
    SceneCond cond = tiny_cond(cfg);
    Tensor<float> prev = random_tensor<float>({cfg.n_views, cfg.n_frames, 3, cfg.height,
                                               cfg.width}, 73);
    Tensor<float> next = gen::extend_video(model, cond, prev, 9);

    const size_t frame = size_t(3) * cfg.height * cfg.width;
    // First frame of the continuation equals the last frame of prev.
    for (size_t i = 0; i < frame; ++i)
        CHECK(next.data[i] == prev.data[(size_t(cfg.n_frames - 1)) * frame + i]);
    // Later frames are new content.
    bool differs = false;
    for (size_t i = frame; i < next.numel(); ++i)
        if (next.data[i] != prev.data[i]) differs = true;
    CHECK(differs);
}

TEST_CASE("checkpoints restore the model bit for bit") {
    GenConfig cfg = tiny_config();
    gen::GenModelT<float> model(cfg, 83);
    const std::string dir = (std::filesystem::temp_directory_path() / "gen_ckpt2").string();
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/model.ckpt";
    gen::save_checkpoint(model, path);

    std::ifstream f(path, std::ios::binary);
    char magic[4];
    f.read(magic, 4);
    CHECK(std::memcmp(magic, "BVLP", 4) == 0);

    auto loaded = gen::load_checkpoint(path);
    CHECK(loaded.config().channels == cfg.channels);
    for (const std::string& name : model.params().order) {
        const auto& a = model.params().at(name);
        const auto& b = loaded.params().at(name);
        REQUIRE(a.numel() == b.numel());
        for (size_t i = 0; i < a.numel(); ++i) CHECK(a.data[i] == b.data[i]);
    }

    const std::string path2 = dir + "/model2.ckpt";
    gen::save_checkpoint(loaded, path2);
    std::ifstream fa(path, std::ios::binary), fb(path2, std::ios::binary);
    std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
}
