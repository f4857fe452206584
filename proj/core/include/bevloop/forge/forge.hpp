#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bevloop/common/ini.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::forge {

struct ForgeSpec {
    std::string name = "forged";
    int n_scenes = 0;
    // Ordered archetype -> weight; weights are normalized internally.
    std::vector<std::pair<std::string, double>> mixture;
    uint64_t seed = 0;
    int horizon_steps = 16;
    float dt = 0.5f;
    float speed_min = 5.5f;
    float speed_max = 8.0f;
    float eps = 0.5f;  // safety threshold the expert respects

    static ForgeSpec from_config(const Config& cfg, const std::string& section = "forge");
};

// Known archetype names, in registry order.
std::vector<std::string> archetype_names();

// Largest-remainder allocation of n_scenes over mixture weights; the counts
// sum to n_scenes exactly and ties go to the earlier mixture entry.
std::vector<int> allocate_counts(const std::vector<std::pair<std::string, double>>& mixture,
                                 int n_scenes);

// Deterministic procedural generation: same spec, same dataset. Every scene
// carries an expert ego trajectory that is failure-free at spec.eps.
scene::Dataset forge_dataset(const ForgeSpec& spec);

// Canonical scene keyword vocabulary and the surface-form map used when
// harvesting keywords from free text (analyzer descriptions, captions).
const std::vector<std::string>& keyword_vocabulary();
const std::map<std::string, std::string>& surface_form_map();

// Lowercase tokens of `text` mapped through the surface-form map; unknown
// tokens are dropped, duplicates removed, order = first appearing.
std::vector<std::string> harvest_keywords(const std::string& text);

}  // namespace bevloop::forge
