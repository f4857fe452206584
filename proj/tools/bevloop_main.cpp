#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bevloop/agent/http_analyzer.hpp"
#include "bevloop/common/error.hpp"
#include "bevloop/common/ini.hpp"
#include "bevloop/forge/forge.hpp"
#include "bevloop/gen/checkpoint.hpp"
#include "bevloop/gen/sample.hpp"
#include "bevloop/loop/driver.hpp"
#include "bevloop/loop/report.hpp"
#include "bevloop/scene/dataset_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cmd_forge(const std::string& spec_path, const std::string& out_dir) {
    const bevloop::Config cfg = bevloop::Config::parse_file(spec_path);
    bool any = false;
    for (const char* section : {"forge", "train", "val"}) {
        if (!cfg.sections().count(section)) continue;
        any = true;
        const bevloop::forge::ForgeSpec spec =
            bevloop::forge::ForgeSpec::from_config(cfg, section);
        const bevloop::scene::Dataset ds = bevloop::forge::forge_dataset(spec);
        const std::string dir = std::string(section) == "forge"
                                    ? out_dir
                                    : out_dir + "/" + section;
        fs::create_directories(dir);
        const std::string path = dir + "/scenes.jsonl";
        bevloop::scene::save_dataset(ds, path);
        std::printf("%s: %zu scenes -> %s\n", section, ds.size(), path.c_str());
    }
    if (!any) {
        std::fprintf(stderr, "spec has no [forge], [train] or [val] section\n");
        return 2;
    }
    return 0;
}

int cmd_run(const std::string& config_path, int iters, const std::string& baseline,
            const std::string& analyzer_kind, const std::string& out_override) {
    bevloop::loop::LoopConfig cfg = bevloop::loop::LoopConfig::from_ini(config_path);
    if (iters > 0) cfg.iters = iters;
    if (!baseline.empty()) cfg.baseline = baseline == "none" ? "" : baseline;
    if (!analyzer_kind.empty()) cfg.analyzer = analyzer_kind;
    if (!out_override.empty()) cfg.out_dir = out_override;

    bevloop::agent::MockAnalyzer mock;
    std::unique_ptr<bevloop::agent::HttpAnalyzer> http;
    bevloop::agent::Analyzer* analyzer = &mock;
    if (cfg.analyzer == "http") {
        http = std::make_unique<bevloop::agent::HttpAnalyzer>(
            bevloop::agent::HttpAnalyzerConfig::from_env());
        fs::create_directories(cfg.out_dir + "/transcripts");
        http->set_transcript_dir(cfg.out_dir + "/transcripts");
        analyzer = http.get();
    }
    const bevloop::loop::RunResult res = bevloop::loop::run_loop(cfg, *analyzer);
    std::fputs(bevloop::loop::write_report(res.run_dir).c_str(), stdout);
    return 0;
}

// Looks for a run manifest next to (or one level above) the requirements
// file to recover the exemplar pool and view geometry without extra flags.
bool resolve_from_manifest(const std::string& req_path, std::string& train_path,
                           bevloop::scene::ViewConfig& views) {
    fs::path p = fs::path(req_path).parent_path();
    for (int up = 0; up < 2; ++up) {
        const fs::path mf = p / "manifest.json";
        if (fs::exists(mf)) {
            std::ifstream is(mf);
            json j = json::parse(is, nullptr, false);
            if (j.is_discarded() || !j.contains("config")) return false;
            const json& c = j["config"];
            train_path = c.value("train", "");
            if (c.contains("views")) {
                const json& v = c["views"];
                views = bevloop::scene::ViewConfig::front_arc(
                    v.value("n_views", 1), v.value("fov_deg", 50.0f), v.value("h", 16),
                    v.value("w", 16), v.value("meters_per_px", 2.0f), v.value("t_frames", 4));
            }
            return !train_path.empty();
        }
        p = p.parent_path();
    }
    return false;
}

int cmd_gen(const std::string& req_path, const std::string& ckpt_path, uint64_t seed,
            const std::string& out_dir, std::string train_path) {
    bevloop::gen::GenModel model = bevloop::gen::load_checkpoint(ckpt_path);
    const bevloop::gen::GenConfig& gc = model.config();
    bevloop::scene::ViewConfig views = bevloop::scene::ViewConfig::front_arc(
        gc.n_views, 50.0f, gc.height, gc.width, 2.0f, gc.n_frames);
    if (train_path.empty() && !resolve_from_manifest(req_path, train_path, views)) {
        std::fprintf(stderr,
                     "no exemplar pool: pass --train or keep the requirements file inside its "
                     "run directory\n");
        return 2;
    }
    const std::vector<bevloop::agent::Requirement> reqs =
        bevloop::agent::load_requirements(req_path);
    if (reqs.empty()) {
        std::fprintf(stderr, "no requirements in %s\n", req_path.c_str());
        return 2;
    }
    const bevloop::scene::Dataset train = bevloop::scene::load_dataset(train_path);
    bevloop::gen::GenerateOptions opt;
    opt.seed = seed;
    const bevloop::scene::Dataset out = bevloop::gen::generate_dataset(model, reqs, train,
                                                                       views, opt);
    fs::create_directories(out_dir);
    const std::string path = out_dir + "/scenes.jsonl";
    bevloop::scene::save_dataset(out, path);
    std::printf("%zu scenes -> %s\n", out.size(), path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-loop scene synthesis for a bird's-eye-view planner"};
    app.require_subcommand(1);

    std::string spec_path, forge_out;
    CLI::App* forge = app.add_subcommand("forge", "procedurally build benchmark datasets");
    forge->add_option("--spec", spec_path, "dataset spec (ini)")->required();
    forge->add_option("--out", forge_out, "output directory")->required();

    std::string run_config, run_baseline, run_analyzer, run_out;
    int run_iters = 0;
    CLI::App* run = app.add_subcommand("run", "run the correction loop");
    run->add_option("--config", run_config, "loop config (ini)")->required();
    run->add_option("--iters", run_iters, "iteration count (overrides config)");
    run->add_option("--baseline", run_baseline, "comparison arm: aide | none")
        ->check(CLI::IsMember({"aide", "none"}));
    run->add_option("--analyzer", run_analyzer, "failure analyzer: mock | http")
        ->check(CLI::IsMember({"mock", "http"}));
    run->add_option("--out", run_out, "output directory (overrides config)");

    std::string gen_reqs, gen_ckpt, gen_out, gen_train;
    uint64_t gen_seed = 0;
    CLI::App* gen = app.add_subcommand("gen", "sample scenes for stored requirements");
    gen->add_option("--requirements", gen_reqs, "requirements.jsonl")->required();
    gen->add_option("--ckpt", gen_ckpt, "generator checkpoint")->required();
    gen->add_option("--seed", gen_seed, "sampling seed")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--train", gen_train, "exemplar pool (defaults to the run's train split)");

    std::string report_run;
    CLI::App* report = app.add_subcommand("report", "summarize a finished run");
    report->add_option("--run", report_run, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (forge->parsed()) return cmd_forge(spec_path, forge_out);
        if (run->parsed())
            return cmd_run(run_config, run_iters, run_baseline, run_analyzer, run_out);
        if (gen->parsed())
            return cmd_gen(gen_reqs, gen_ckpt, gen_seed, gen_out, gen_train);
        if (report->parsed()) {
            std::fputs(bevloop::loop::write_report(report_run).c_str(), stdout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
