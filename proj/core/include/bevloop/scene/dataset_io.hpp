#pragma once

#include <string>

#include "bevloop/scene/types.hpp"

namespace bevloop::scene {

inline constexpr const char* kDatasetSchema = "bevloop.dataset";
inline constexpr int kDatasetVersion = 1;

// JSONL: one header record naming schema/version/provenance, then one
// record per scene. Reals round-trip bit-exactly (float values are written
// with shortest round-trip decimals, at most 9 significant digits).
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace bevloop::scene
