#pragma once

#include <string>
#include <vector>

#include "bevloop/agent/analyzer.hpp"
#include "bevloop/scene/types.hpp"
#include "bevloop/taxonomy/cluster.hpp"
#include "bevloop/taxonomy/failures.hpp"

namespace bevloop::agent {

inline constexpr double kJaccardDelta = 0.5;
inline constexpr int kRetrievalTopK = 5;

// Set-semantics Jaccard; 0 when both sides are empty.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Per-failure analysis product: every causal label clearing the classify
// threshold (joined with '+') plus harvested cause keywords.
struct FailureCause {
    std::string scene_id;
    std::string label;
    std::vector<std::string> keywords;
    std::string description;
};

std::vector<FailureCause> analyze_failures(Analyzer& analyzer,
                                           const std::vector<taxonomy::FailureRecord>& failures,
                                           const taxonomy::FailureTaxonomy& taxonomy,
                                           double tau = kClassifyThreshold);

// A generation requirement: the text instruction plus the exemplar scenes
// retrieved to condition on. One requirement per analyzed failure; labels
// that co-occur on the same failure are merged into one requirement.
struct Requirement {
    std::string id;
    std::string label;
    std::vector<std::string> keywords;      // canonical, most frequent first
    std::string text;
    std::vector<std::string> failure_ids;   // failures this covers
    std::vector<std::string> retrieved;     // exemplar train scene ids
    double delta_used = kJaccardDelta;
};

struct FormulateOptions {
    double delta = kJaccardDelta;
    int top_k = kRetrievalTopK;
    int max_keywords = 5;
    std::string id_prefix = "req";
};

// Emits one requirement per cause and retrieves exemplars whose keyword
// sets clear the Jaccard bar. A requirement with zero matches retries once
// with delta halved.
std::vector<Requirement> formulate(const std::vector<FailureCause>& causes,
                                   const scene::Dataset& train, const FormulateOptions& opt = {});

void save_requirements(const std::vector<Requirement>& reqs, const std::string& path);
std::vector<Requirement> load_requirements(const std::string& path);

}  // namespace bevloop::agent
