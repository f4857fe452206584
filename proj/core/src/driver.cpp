#include "bevloop/loop/driver.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "bevloop/agent/aide.hpp"
#include "bevloop/agent/requirements.hpp"
#include "bevloop/common/error.hpp"
#include "bevloop/common/ini.hpp"
#include "bevloop/common/rng.hpp"
#include "bevloop/gen/checkpoint.hpp"
#include "bevloop/gen/sample.hpp"
#include "bevloop/gen/train.hpp"
#include "bevloop/loop/distribution.hpp"
#include "bevloop/planner/metrics.hpp"
#include "bevloop/scene/dataset_io.hpp"
#include "bevloop/taxonomy/cluster.hpp"
#include "bevloop/taxonomy/keywords.hpp"

namespace bevloop::loop {

namespace fs = std::filesystem;
using nlohmann::json;

LoopConfig LoopConfig::from_ini(const std::string& path) {
    const Config c = Config::parse_file(path);
    LoopConfig out;
    out.out_dir = c.get_or("run", "out", out.out_dir);
    out.seed = static_cast<uint64_t>(c.get_int_or("run", "seed", 0));
    out.baseline = c.get_or("run", "baseline", "");
    out.analyzer = c.get_or("run", "analyzer", "mock");
    out.train_path = c.get("data", "train");
    out.val_path = c.get("data", "val");

    out.views = scene::ViewConfig::front_arc(
        static_cast<int>(c.get_int_or("views", "n_views", 1)),
        static_cast<float>(c.get_real_or("views", "fov_deg", 50.0)),
        static_cast<int>(c.get_int_or("views", "h", 16)),
        static_cast<int>(c.get_int_or("views", "w", 16)),
        static_cast<float>(c.get_real_or("views", "meters_per_px", 2.0)),
        static_cast<int>(c.get_int_or("views", "t_frames", 4)));

    out.knn.k = static_cast<int>(c.get_int_or("planner", "k", out.knn.k));
    out.knn.grid = static_cast<int>(c.get_int_or("planner", "grid", out.knn.grid));
    out.knn.t_e2e_steps =
        static_cast<int>(c.get_int_or("planner", "t_e2e_steps", out.knn.t_e2e_steps));
    out.knn.dt = static_cast<float>(c.get_real_or("planner", "dt", out.knn.dt));
    out.knn.speed_scale =
        static_cast<float>(c.get_real_or("planner", "speed_scale", out.knn.speed_scale));

    out.detect.eps = static_cast<float>(c.get_real_or("detect", "eps", out.detect.eps));
    out.detect.t_e2e_steps = out.knn.t_e2e_steps;
    out.detect.render_seed = static_cast<uint64_t>(c.get_int_or("detect", "render_seed", 0));

    out.gen.patch = static_cast<int>(c.get_int_or("gen", "patch", out.gen.patch));
    out.gen.channels = static_cast<int>(c.get_int_or("gen", "channels", out.gen.channels));
    out.gen.n_blocks = static_cast<int>(c.get_int_or("gen", "n_blocks", out.gen.n_blocks));
    out.gen.n_heads = static_cast<int>(c.get_int_or("gen", "n_heads", out.gen.n_heads));
    out.gen.fourier_bands =
        static_cast<int>(c.get_int_or("gen", "fourier_bands", out.gen.fourier_bands));
    out.gen.n_box = static_cast<int>(c.get_int_or("gen", "n_box", out.gen.n_box));
    out.gen.text_len = static_cast<int>(c.get_int_or("gen", "text_len", out.gen.text_len));
    out.gen.sample_steps =
        static_cast<int>(c.get_int_or("gen", "sample_steps", out.gen.sample_steps));
    out.gen.overlap = static_cast<int>(c.get_int_or("gen", "overlap", out.gen.overlap));
    out.gen.guide_text =
        static_cast<float>(c.get_real_or("gen", "guide_text", out.gen.guide_text));
    out.gen.guide_back =
        static_cast<float>(c.get_real_or("gen", "guide_back", out.gen.guide_back));
    out.gen.guide_fore =
        static_cast<float>(c.get_real_or("gen", "guide_fore", out.gen.guide_fore));
    out.gen.null_dropout =
        static_cast<float>(c.get_real_or("gen", "null_dropout", out.gen.null_dropout));
    out.gen.lr = static_cast<float>(c.get_real_or("gen", "lr", out.gen.lr));
    out.gen_epochs = static_cast<int>(c.get_int_or("gen", "epochs", out.gen_epochs));
    out.gen_batch = static_cast<int>(c.get_int_or("gen", "batch", out.gen_batch));

    out.iters = static_cast<int>(c.get_int_or("loop", "iters", out.iters));

    const std::vector<double> hz =
        c.get_real_list_or("eval", "horizons", std::vector<double>{1.0, 2.0, 3.0});
    out.horizons_s.clear();
    for (double h : hz) out.horizons_s.push_back(static_cast<float>(h));
    return out;
}

void LoopConfig::validate() const {
    if (iters < 1) throw InvalidArgument("need at least one iteration");
    if (train_path.empty() || val_path.empty())
        throw InvalidArgument("both dataset paths are required");
    if (!baseline.empty() && baseline != "aide")
        throw InvalidArgument("unknown baseline " + baseline);
    if (analyzer != "mock" && analyzer != "http")
        throw InvalidArgument("unknown analyzer " + analyzer);
    if (horizons_s.empty()) throw InvalidArgument("need at least one horizon");
    views.validate();
    // The generator works on the same geometry the planner sees.
    ::bevloop::gen::GenConfig g = gen;
    g.n_views = views.n_views;
    g.n_frames = views.t_frames;
    g.height = views.h;
    g.width = views.w;
    g.validate();
}

namespace {

using gen::GenConfig;

GenConfig synced_gen(const LoopConfig& cfg) {
    GenConfig g = cfg.gen;
    g.n_views = cfg.views.n_views;
    g.n_frames = cfg.views.t_frames;
    g.height = cfg.views.h;
    g.width = cfg.views.w;
    return g;
}

json views_json(const scene::ViewConfig& v) {
    json j;
    j["n_views"] = v.n_views;
    j["fov_deg"] = v.fov_deg;
    j["h"] = v.h;
    j["w"] = v.w;
    j["meters_per_px"] = v.meters_per_px;
    j["t_frames"] = v.t_frames;
    return j;
}

json config_json(const LoopConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["iters"] = cfg.iters;
    j["baseline"] = cfg.baseline.empty() ? "none" : cfg.baseline;
    j["analyzer"] = cfg.analyzer;
    j["train"] = cfg.train_path;
    j["val"] = cfg.val_path;
    j["views"] = views_json(cfg.views);
    j["planner"] = {{"k", cfg.knn.k},
                    {"grid", cfg.knn.grid},
                    {"t_e2e_steps", cfg.knn.t_e2e_steps},
                    {"dt", cfg.knn.dt},
                    {"speed_scale", cfg.knn.speed_scale}};
    j["detect"] = {{"eps", cfg.detect.eps}, {"render_seed", cfg.detect.render_seed}};
    j["gen"] = json::parse(synced_gen(cfg).to_json());
    j["gen_train"] = {{"epochs", cfg.gen_epochs}, {"batch", cfg.gen_batch}};
    json hz = json::array();
    for (float h : cfg.horizons_s) hz.push_back(h);
    j["horizons_s"] = hz;
    return j;
}

void save_failures(const std::vector<taxonomy::FailureRecord>& fails, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    json header;
    header["schema"] = "bevloop.failures";
    header["version"] = 1;
    header["count"] = fails.size();
    os << header.dump() << "\n";
    for (const auto& f : fails) {
        json j;
        j["scene_id"] = f.scene_id;
        j["step"] = f.collision_step;
        j["time_s"] = f.collision_time_s;
        j["collider_id"] = f.collider_id;
        j["collider_class"] = scene::to_string(f.collider_cls);
        j["detected"] = f.collider_detected;
        j["weather"] = scene::to_string(f.tags.weather);
        j["time_of_day"] = scene::to_string(f.tags.time_of_day);
        j["density"] = scene::to_string(f.tags.density);
        j["archetype"] = f.archetype;
        j["keywords"] = f.scene_keywords;
        os << j.dump() << "\n";
    }
    if (!os) throw IoError("failed writing " + path);
}

json report_json(const IterationReport& r) {
    json j;
    j["iteration"] = r.iteration;
    j["train_failures"] = r.train_failures;
    j["val_collision_rate"] = r.val_collision_rate;
    j["val_l2_avg"] = r.val_l2_avg;
    j["val_l2_by_horizon"] = r.val_l2_by_horizon;
    j["ledger"] = {{"held_over", r.ledger_old}, {"new", r.ledger_new}, {"total", r.ledger_total}};
    if (r.dd_valid) j["dd"] = r.dd;
    j["n_requirements"] = r.n_requirements;
    j["n_generated"] = r.n_generated;
    j["bank_size"] = r.bank_size;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << text;
    if (!os) throw IoError("failed writing " + path);
}

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

RunResult run_loop(const LoopConfig& cfg, agent::Analyzer& analyzer) {
    cfg.validate();
    const GenConfig gcfg = synced_gen(cfg);
    fs::create_directories(cfg.out_dir);

    const scene::Dataset train = scene::load_dataset(cfg.train_path);
    const scene::Dataset val = scene::load_dataset(cfg.val_path);
    if (train.scenes.empty() || val.scenes.empty())
        throw InvalidArgument("empty dataset");

    json timing;
    double t0 = now_s();

    planner::KnnPlanner planner(cfg.knn, cfg.views, cfg.detect.render_seed);
    planner.train(train);
    timing["planner_train_s"] = now_s() - t0;

    const bool aide = cfg.baseline == "aide";
    std::unique_ptr<gen::GenModel> model;
    if (!aide) {
        t0 = now_s();
        model = std::make_unique<gen::GenModel>(gcfg, cfg.seed);
        std::vector<gen::TrainSample> samples;
        samples.reserve(train.scenes.size());
        for (const auto& s : train.scenes)
            samples.push_back(
                gen::make_train_sample(s, cfg.views, gcfg, cfg.detect.render_seed));
        gen::TrainOptions topt;
        topt.epochs = cfg.gen_epochs;
        topt.batch = cfg.gen_batch;
        topt.seed = cfg.seed;
        gen::TrainReport trep = gen::train(*model, samples, topt);
        gen::save_checkpoint(*model, cfg.out_dir + "/generator.ckpt");
        json losses = json::array();
        for (float l : trep.epoch_loss) losses.push_back(l);
        timing["gen_train_s"] = now_s() - t0;
        timing["gen_train_loss"] = losses;
    }

    taxonomy::DetectOptions detect = cfg.detect;
    detect.t_e2e_steps = cfg.knn.t_e2e_steps;
    detect.exclude_self = true;
    detect.with_overlay = cfg.analyzer == "http";

    const std::vector<std::string> kOneStepLabels = {"Background", "Foreground", "Weather"};

    RunResult result;
    result.run_dir = cfg.out_dir;

    std::set<std::string> prev_ids;
    std::vector<std::string> support;
    KeywordDistribution prev_dist;
    double prev_dd = 0.0;
    bool prev_dd_valid = false;

    auto eval_val = [&](IterationReport& r) {
        const planner::EvalResult ev = planner::evaluate_planner(
            planner, val, cfg.views, detect.eps, cfg.knn.t_e2e_steps, cfg.horizons_s,
            cfg.detect.render_seed, false);
        r.val_collision_rate =
            ev.n_scenes ? double(ev.n_failures) / double(ev.n_scenes) : 0.0;
        r.val_l2_avg = ev.l2.avg;
        r.val_l2_by_horizon = ev.l2.values;
    };

    int k = 0;
    for (; k < cfg.iters; ++k) {
        const std::string iter_dir = cfg.out_dir + "/iter_" + std::to_string(k);
        fs::create_directories(iter_dir);
        json iter_timing;

        IterationReport rep;
        rep.iteration = k;

        t0 = now_s();
        std::vector<taxonomy::FailureRecord> fails =
            taxonomy::detect_failures(planner, train, cfg.views, detect);
        iter_timing["mine_s"] = now_s() - t0;

        t0 = now_s();
        eval_val(rep);
        iter_timing["eval_s"] = now_s() - t0;

        rep.train_failures = fails.size();
        std::set<std::string> ids;
        for (const auto& f : fails) ids.insert(f.scene_id);
        for (const auto& id : ids)
            if (prev_ids.count(id))
                ++rep.ledger_old;
        rep.ledger_total = ids.size();
        rep.ledger_new = ids.size() - rep.ledger_old;

        std::vector<std::vector<std::string>> kwsets;
        for (const auto& f : fails) kwsets.push_back(f.scene_keywords);
        if (support.empty() && !fails.empty()) support = build_support(kwsets);
        if (!support.empty()) {
            if (fails.empty()) {
                // Nothing left to measure; the distance carries forward.
                rep.dd = prev_dd;
                rep.dd_valid = prev_dd_valid;
            } else {
                const KeywordDistribution cur = distribution_on(kwsets, support);
                if (!prev_dist.empty()) {
                    rep.dd = hellinger(cur, prev_dist);
                    rep.dd_valid = true;
                    prev_dd = rep.dd;
                    prev_dd_valid = true;
                }
                prev_dist = cur;
            }
        }
        prev_ids = std::move(ids);

        save_failures(fails, iter_dir + "/failures.jsonl");

        if (fails.empty()) {
            rep.bank_size = planner.bank_size();
            agent::save_requirements({}, iter_dir + "/requirements.jsonl");
            fs::create_directories(iter_dir + "/generated");
            scene::Dataset none;
            none.name = "generated";
            none.provenance = aide ? "retrieved" : "generated";
            scene::save_dataset(none, iter_dir + "/generated/scenes.jsonl");
            write_text(iter_dir + "/metrics.json", report_json(rep).dump(2) + "\n");
            timing["iter_" + std::to_string(k)] = iter_timing;
            result.iterations.push_back(rep);
            result.terminated_early = true;
            ++k;
            break;
        }

        // Free-form pass over every failure seeds the taxonomy; the
        // structured two-step pass then classifies against its labels.
        t0 = now_s();
        std::vector<taxonomy::Annotation> annos;
        for (const auto& f : fails) {
            const agent::CaseContext ctx = agent::context_of(f);
            auto [cls, desc] = analyzer.analyze_one_step(ctx, kOneStepLabels);
            taxonomy::Annotation a;
            a.scene_id = f.scene_id;
            a.descriptions.push_back(desc);
            for (const auto& kw : f.scene_keywords) a.descriptions.push_back(kw);
            a.tags = f.tags;
            a.collider_cls = f.collider_cls;
            annos.push_back(std::move(a));
        }
        const taxonomy::MockExtractor extractor;
        const taxonomy::FailureTaxonomy tax =
            taxonomy::build_taxonomy(annos, extractor, taxonomy::kFuzzyMergeThreshold, cfg.seed);
        std::vector<agent::FailureCause> causes = agent::analyze_failures(analyzer, fails, tax);
        agent::FormulateOptions fopt;
        fopt.id_prefix = "it" + std::to_string(k) + "_req";
        std::vector<agent::Requirement> reqs = agent::formulate(causes, train, fopt);
        rep.n_requirements = reqs.size();
        agent::save_requirements(reqs, iter_dir + "/requirements.jsonl");
        iter_timing["analyze_s"] = now_s() - t0;

        // Both arms add one scene per (requirement, selection) so their
        // budgets match by construction; requirements with no retrieval
        // hits fall back to a fixed-size walk over the pool.
        size_t arm_budget = 0;
        for (const auto& r : reqs)
            arm_budget += r.retrieved.empty() ? std::min<size_t>(3, train.scenes.size())
                                              : r.retrieved.size();

        t0 = now_s();
        scene::Dataset genset;
        if (aide) {
            genset = agent::retrieval_baseline(reqs, train, static_cast<int>(arm_budget),
                                               "it" + std::to_string(k) + "_retr");
        } else {
            gen::GenerateOptions gopt;
            gopt.seed = hash_combine(cfg.seed, static_cast<uint64_t>(k) + 1);
            gopt.id_prefix = "it" + std::to_string(k) + "_gen";
            genset = gen::generate_dataset(*model, reqs, train, cfg.views, gopt);
        }
        rep.n_generated = genset.scenes.size();
        fs::create_directories(iter_dir + "/generated");
        scene::save_dataset(genset, iter_dir + "/generated/scenes.jsonl");
        iter_timing["generate_s"] = now_s() - t0;

        t0 = now_s();
        planner.train(genset);
        rep.bank_size = planner.bank_size();
        iter_timing["retrain_s"] = now_s() - t0;

        write_text(iter_dir + "/metrics.json", report_json(rep).dump(2) + "\n");
        timing["iter_" + std::to_string(k)] = iter_timing;
        result.iterations.push_back(rep);
    }

    // Closing eval scores the bank as left by the last update.
    IterationReport fin;
    fin.iteration = k;
    t0 = now_s();
    const std::vector<taxonomy::FailureRecord> last_fails =
        taxonomy::detect_failures(planner, train, cfg.views, detect);
    fin.train_failures = last_fails.size();
    eval_val(fin);
    fin.bank_size = planner.bank_size();
    timing["final_eval_s"] = now_s() - t0;
    result.final_eval = fin;

    json manifest;
    manifest["schema"] = "bevloop.run";
    manifest["version"] = 1;
    manifest["config"] = config_json(cfg);
    json iters = json::array();
    for (const auto& r : result.iterations) iters.push_back(report_json(r));
    manifest["iterations"] = iters;
    manifest["final"] = report_json(fin);
    manifest["terminated_early"] = result.terminated_early;
    if (!result.iterations.empty()) {
        const double first = result.iterations.front().val_collision_rate;
        const double last = fin.val_collision_rate;
        manifest["val_collision_initial"] = first;
        manifest["val_collision_final"] = last;
        manifest["val_collision_rel_change"] = first > 0.0 ? (last - first) / first : 0.0;
    }
    write_text(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
    write_text(cfg.out_dir + "/timing.json", timing.dump(2) + "\n");
    return result;
}

}  // namespace bevloop::loop
