#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bevloop/taxonomy/keywords.hpp"

namespace bevloop::taxonomy {

inline constexpr double kFuzzyMergeThreshold = 0.8;

struct MergeResult {
    // Surface form -> canonical form (identity for singleton groups).
    std::map<std::string, std::string> canonical;
    // Canonical form -> summed frequency, lexicographically sorted.
    std::vector<std::pair<std::string, int>> merged;
};

// Single-link grouping of near-duplicate surface forms: any pair within
// `threshold` (Euclidean, unit-sphere embeddings) joins one group. The
// most frequent member becomes canonical; frequency ties break toward the
// lexicographically smaller form.
MergeResult fuzzy_merge(const std::vector<std::pair<std::string, int>>& keyword_freq,
                        const std::map<std::string, Embedding>& embeddings,
                        double threshold = kFuzzyMergeThreshold);

// Heights of the n-1 agglomerative merges under average linkage, ascending.
std::vector<double> average_linkage_heights(const std::vector<Embedding>& points);

// Dendrogram elbow: the K whose final-merge height jumps most, relative to
// the merge just below it. Fewer than 3 points keeps every point its own
// cluster; an all-identical set collapses to 1.
int select_k(const std::vector<Embedding>& points);

struct KmeansResult {
    std::vector<int> assignment;
    std::vector<Embedding> centers;
    double objective = 0.0;  // sum of squared distances to assigned center
};

// Lloyd iterations from a deterministic farthest-point init (first center
// drawn from `seed`). Empty clusters are re-seeded with the point farthest
// from its current center.
KmeansResult kmeans(const std::vector<Embedding>& points, int k, uint64_t seed);

// Fixed keyword -> category table used by the mock summarizer.
const std::map<std::string, std::string>& category_table();

// Majority vote of the cluster's keywords through category_table(); ties
// and unknown-only clusters fall back to the lexicographically smallest
// candidate ("Uncategorized" when nothing matched).
std::string summarize_label(const std::vector<std::string>& cluster_keywords);

struct FailureTaxonomy {
    int k = 0;
    std::vector<std::string> vocabulary;             // canonical keywords, sorted
    std::map<std::string, std::string> canonical;    // surface -> canonical
    std::vector<std::vector<std::string>> clusters;  // canonical keywords per cluster
    std::vector<std::string> labels;                 // one label per cluster

    // Cluster label for a keyword (surface or canonical); empty if unknown.
    std::string label_of(const std::string& keyword) const;
};

FailureTaxonomy build_taxonomy(const std::vector<Annotation>& annotations,
                               const KeywordExtractor& extractor,
                               double fuzzy_threshold = kFuzzyMergeThreshold,
                               uint64_t seed = 0);

void save_taxonomy(const FailureTaxonomy& t, const std::string& path);
FailureTaxonomy load_taxonomy(const std::string& path);

}  // namespace bevloop::taxonomy
