#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevloop/agent/analyzer.hpp"
#include "bevloop/gen/model.hpp"
#include "bevloop/planner/planner.hpp"
#include "bevloop/scene/types.hpp"
#include "bevloop/taxonomy/failures.hpp"

namespace bevloop::loop {

struct LoopConfig {
    std::string out_dir = "runs/out";
    uint64_t seed = 0;
    int iters = 3;
    std::string baseline;            // "" or "aide"
    std::string analyzer = "mock";   // "mock" or "http"
    std::string train_path;
    std::string val_path;
    scene::ViewConfig views = scene::ViewConfig::front_arc(1, 50.0f, 16, 16, 2.0f, 4);
    planner::KnnConfig knn;
    taxonomy::DetectOptions detect;
    gen::GenConfig gen;
    int gen_epochs = 20;
    int gen_batch = 4;
    std::vector<float> horizons_s = {1.0f, 2.0f, 3.0f};

    static LoopConfig from_ini(const std::string& path);
    void validate() const;
};

struct IterationReport {
    int iteration = 0;
    size_t train_failures = 0;
    double val_collision_rate = 0.0;
    double val_l2_avg = 0.0;
    std::vector<double> val_l2_by_horizon;
    // Failure-set churn against the previous iteration.
    size_t ledger_old = 0;
    size_t ledger_new = 0;
    size_t ledger_total = 0;
    // Failure keyword distribution distance to the previous iteration, on
    // the support frozen at the first mined iteration.
    double dd = 0.0;
    bool dd_valid = false;
    size_t n_requirements = 0;
    size_t n_generated = 0;
    size_t bank_size = 0;
};

struct RunResult {
    std::string run_dir;
    std::vector<IterationReport> iterations;
    IterationReport final_eval;      // closing eval after the last update
    bool terminated_early = false;   // no train failures left to mine
};

// Runs the full correction loop: mine failures on the training split
// (leave-one-out), analyze them into requirements, synthesize or retrieve
// new scenes, retrain, and score the held-out split. Writes the mandated
// run directory layout under cfg.out_dir. Every artifact except
// timing.json is byte-deterministic for a fixed config.
RunResult run_loop(const LoopConfig& cfg, agent::Analyzer& analyzer);

}  // namespace bevloop::loop
