#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bevloop/scene/types.hpp"
#include "bevloop/taxonomy/failures.hpp"
#include "bevloop/taxonomy/keywords.hpp"

namespace bevloop::agent {

// Acceptance threshold on per-label confidence.
inline constexpr double kClassifyThreshold = 0.8;

// The slice of a failure case an analyzer looks at.
struct CaseContext {
    std::string scene_id;
    scene::SceneTags tags;
    scene::ObjectClass collider_cls = scene::ObjectClass::vehicle;
    bool collider_detected = true;
    std::vector<std::string> scene_keywords;
    std::vector<std::string> attachments;  // PNG bytes, for image analyzers
};

CaseContext context_of(const taxonomy::FailureRecord& rec);
CaseContext context_of(const taxonomy::Annotation& a);

struct ClassifyResult {
    std::map<std::string, double> confidence;
    // Labels at or above tau, lexicographically sorted.
    std::vector<std::string> accepted(double tau = kClassifyThreshold) const;
};

class Analyzer {
  public:
    virtual ~Analyzer() = default;
    virtual std::string name() const = 0;
    // Stage 1: confidence per candidate label.
    virtual ClassifyResult classify(const CaseContext& ctx,
                                    const std::vector<std::string>& labels) = 0;
    // Stage 2: short cause description, conditioned on the chosen label.
    virtual std::string describe(const CaseContext& ctx, const std::string& label) = 0;
    // Collapsed single query answering both at once. Kept for comparison;
    // the loop itself always runs the two-stage path.
    virtual std::pair<ClassifyResult, std::string> analyze_one_step(
        const CaseContext& ctx, const std::vector<std::string>& labels) = 0;
};

// Deterministic stand-in: a fixed rule table over tags and collider class.
// The one-step path only sees the collider, which is exactly the failure
// mode the two-stage decomposition exists to avoid.
class MockAnalyzer : public Analyzer {
  public:
    std::string name() const override { return "mock"; }
    ClassifyResult classify(const CaseContext& ctx,
                            const std::vector<std::string>& labels) override;
    std::string describe(const CaseContext& ctx, const std::string& label) override;
    std::pair<ClassifyResult, std::string> analyze_one_step(
        const CaseContext& ctx, const std::vector<std::string>& labels) override;
};

// Fraction of cases whose gt label is among the accepted labels.
struct DecompositionEval {
    double two_step_accuracy = 0.0;
    double one_step_accuracy = 0.0;
};
DecompositionEval evaluate_decomposition(Analyzer& analyzer,
                                         const std::vector<taxonomy::Annotation>& annotations,
                                         const std::vector<std::string>& labels,
                                         double tau = kClassifyThreshold);

}  // namespace bevloop::agent
