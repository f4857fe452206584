#include "bevloop/agent/analyzer.hpp"

#include <algorithm>
#include <set>

#include "bevloop/taxonomy/cluster.hpp"

namespace bevloop::agent {

CaseContext context_of(const taxonomy::FailureRecord& rec) {
    CaseContext c;
    c.scene_id = rec.scene_id;
    c.tags = rec.tags;
    c.collider_cls = rec.collider_cls;
    c.collider_detected = rec.collider_detected;
    c.scene_keywords = rec.scene_keywords;
    return c;
}

CaseContext context_of(const taxonomy::Annotation& a) {
    CaseContext c;
    c.scene_id = a.scene_id;
    c.tags = a.tags;
    c.collider_cls = a.collider_cls;
    return c;
}

std::vector<std::string> ClassifyResult::accepted(double tau) const {
    std::vector<std::string> out;
    for (const auto& [label, conf] : confidence) {
        if (conf >= tau) out.push_back(label);
    }
    return out;  // map iteration is already sorted
}

namespace {

bool is_road_user(scene::ObjectClass c) {
    return c == scene::ObjectClass::vehicle || c == scene::ObjectClass::pedestrian ||
           c == scene::ObjectClass::cyclist;
}

// Scene keywords belonging to one taxonomy category, via the fixed table.
std::vector<std::string> keywords_in_category(const std::vector<std::string>& keywords,
                                              const std::string& category) {
    std::vector<std::string> out;
    for (const auto& k : keywords) {
        auto it = taxonomy::category_table().find(k);
        if (it != taxonomy::category_table().end() && it->second == category) out.push_back(k);
    }
    return out;
}

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s += " ";
        s += w;
    }
    return s;
}

}  // namespace

ClassifyResult MockAnalyzer::classify(const CaseContext& ctx,
                                      const std::vector<std::string>& labels) {
    ClassifyResult r;
    for (const auto& label : labels) {
        double conf = 0.0;
        if (label == "Weather") {
            if (ctx.tags.weather == scene::Weather::rain ||
                ctx.tags.time_of_day == scene::TimeOfDay::night)
                conf = 1.0;
        } else if (label == "Foreground") {
            if (is_road_user(ctx.collider_cls)) conf = 1.0;
        } else if (label == "Background") {
            if (ctx.collider_cls == scene::ObjectClass::barrier) conf = 1.0;
        }
        r.confidence[label] = conf;
    }
    return r;
}

std::string MockAnalyzer::describe(const CaseContext& ctx, const std::string& label) {
    const std::string collider = scene::to_string(ctx.collider_cls);
    std::vector<std::string> kws = keywords_in_category(ctx.scene_keywords, label);
    if (label == "Weather") {
        if (ctx.tags.time_of_day == scene::TimeOfDay::night) kws.push_back("night");
        if (ctx.tags.weather == scene::Weather::rain) kws.push_back("rain");
        std::set<std::string> seen;
        std::vector<std::string> dedup;
        for (auto& k : kws)
            if (seen.insert(k).second) dedup.push_back(k);
        const std::string detected =
            ctx.collider_detected ? "a detected" : "an undetected";
        return "collision under " + join(dedup) + " conditions with " + detected + " " + collider;
    }
    if (label == "Background") {
        if (kws.empty()) kws.push_back("barrier");
        return "the layout left no room: " + join(kws) + " constrained the path";
    }
    // Foreground and anything unrecognized: blame the interaction.
    if (kws.empty()) kws.push_back(collider);
    return "the planner failed to yield to a " + collider + " during " + join(kws);
}

std::pair<ClassifyResult, std::string> MockAnalyzer::analyze_one_step(
    const CaseContext& ctx, const std::vector<std::string>& labels) {
    // One collapsed query: the rule table degrades to collider identity and
    // the description carries no scene context.
    ClassifyResult r;
    for (const auto& label : labels) {
        double conf = 0.0;
        if (label == "Foreground" && is_road_user(ctx.collider_cls)) conf = 1.0;
        if (label == "Background" && ctx.collider_cls == scene::ObjectClass::barrier) conf = 1.0;
        r.confidence[label] = conf;
    }
    const std::string collider = scene::to_string(ctx.collider_cls);
    return {r, "the planner collided with a " + collider};
}

DecompositionEval evaluate_decomposition(Analyzer& analyzer,
                                         const std::vector<taxonomy::Annotation>& annotations,
                                         const std::vector<std::string>& labels, double tau) {
    DecompositionEval e;
    if (annotations.empty()) return e;
    int two = 0;
    int one = 0;
    for (const auto& a : annotations) {
        const CaseContext ctx = context_of(a);
        const auto accepted2 = analyzer.classify(ctx, labels).accepted(tau);
        if (std::find(accepted2.begin(), accepted2.end(), a.gt_label) != accepted2.end()) ++two;
        const auto accepted1 = analyzer.analyze_one_step(ctx, labels).first.accepted(tau);
        if (std::find(accepted1.begin(), accepted1.end(), a.gt_label) != accepted1.end()) ++one;
    }
    e.two_step_accuracy = static_cast<double>(two) / static_cast<double>(annotations.size());
    e.one_step_accuracy = static_cast<double>(one) / static_cast<double>(annotations.size());
    return e;
}

}  // namespace bevloop::agent
