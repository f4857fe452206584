#include "bevloop/agent/aide.hpp"

#include <cstdio>

#include "bevloop/common/error.hpp"

namespace bevloop::agent {

scene::Dataset retrieval_baseline(const std::vector<Requirement>& reqs,
                                  const scene::Dataset& train, int budget,
                                  const std::string& id_prefix) {
    scene::Dataset out;
    out.name = id_prefix;
    out.provenance = "retrieval_baseline";
    if (budget <= 0) return out;

    // Flatten the retrieval lists in requirement order, keeping their
    // per-requirement ranking.
    std::vector<const scene::BevScene*> pool;
    size_t max_len = 0;
    for (const auto& r : reqs) max_len = std::max(max_len, r.retrieved.size());
    for (size_t rank = 0; rank < max_len; ++rank) {
        for (const auto& r : reqs) {
            if (rank >= r.retrieved.size()) continue;
            const scene::BevScene* s = train.find(r.retrieved[rank]);
            if (s == nullptr)
                throw InvalidArgument("retrieval baseline: unknown train scene " +
                                      r.retrieved[rank]);
            pool.push_back(s);
        }
    }
    if (pool.empty()) return out;

    for (int i = 0; i < budget; ++i) {
        scene::BevScene copy = *pool[static_cast<size_t>(i) % pool.size()];
        char id[64];
        std::snprintf(id, sizeof(id), "%s_%04d", id_prefix.c_str(), i);
        copy.id = id;
        out.scenes.push_back(std::move(copy));
    }
    return out;
}

}  // namespace bevloop::agent
