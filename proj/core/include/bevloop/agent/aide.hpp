#pragma once

#include <string>
#include <vector>

#include "bevloop/agent/requirements.hpp"
#include "bevloop/scene/types.hpp"

namespace bevloop::agent {

// Retrieval-only baseline arm: fills the same scene budget the generative
// arm gets, but by replaying the retrieved train exemplars instead of
// synthesizing anything. Copies cycle round-robin over the requirements'
// retrieval lists and keep the source scene's content verbatim.
scene::Dataset retrieval_baseline(const std::vector<Requirement>& reqs,
                                  const scene::Dataset& train, int budget,
                                  const std::string& id_prefix = "retr");

}  // namespace bevloop::agent
