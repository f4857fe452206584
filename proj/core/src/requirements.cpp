#include "bevloop/agent/requirements.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "bevloop/common/error.hpp"
#include "bevloop/forge/forge.hpp"
#include "json.hpp"

namespace bevloop::agent {

using nlohmann::json;

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 0.0;
    int inter = 0;
    for (const auto& x : sa) inter += sb.count(x) ? 1 : 0;
    const int uni = static_cast<int>(sa.size() + sb.size()) - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<FailureCause> analyze_failures(Analyzer& analyzer,
                                           const std::vector<taxonomy::FailureRecord>& failures,
                                           const taxonomy::FailureTaxonomy& taxonomy,
                                           double tau) {
    std::vector<std::string> labels;
    {
        std::set<std::string> uniq(taxonomy.labels.begin(), taxonomy.labels.end());
        labels.assign(uniq.begin(), uniq.end());
    }
    if (labels.empty()) labels = {"Background", "Foreground", "Weather"};

    std::vector<FailureCause> out;
    out.reserve(failures.size());
    for (const auto& rec : failures) {
        const CaseContext ctx = context_of(rec);
        const ClassifyResult cls = analyzer.classify(ctx, labels);

        // Every label clearing tau contributes; a failure can be both a
        // Foreground and a Weather case and the requirement merges them.
        // If nothing clears the bar, keep the single best guess.
        std::vector<std::string> hit;
        std::string best_label;
        double best = -1.0;
        for (const auto& [label, conf] : cls.confidence) {
            if (conf >= tau) hit.push_back(label);
            if (conf > best + 1e-12) {
                best = conf;
                best_label = label;
            }
        }
        if (hit.empty()) hit.push_back(best_label.empty() ? labels.front() : best_label);
        std::sort(hit.begin(), hit.end());

        FailureCause c;
        c.scene_id = rec.scene_id;
        for (const auto& label : hit) {
            c.label += (c.label.empty() ? "" : "+") + label;
            if (!c.description.empty()) c.description += " ";
            c.description += analyzer.describe(ctx, label);
        }

        // Harvest keywords from the merged description, fold through the
        // taxonomy's canonical map so variants count together.
        std::set<std::string> seen;
        for (const auto& k : forge::harvest_keywords(c.description)) {
            auto it = taxonomy.canonical.find(k);
            const std::string& canon = it != taxonomy.canonical.end() ? it->second : k;
            if (seen.insert(canon).second) c.keywords.push_back(canon);
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Requirement> formulate(const std::vector<FailureCause>& causes,
                                   const scene::Dataset& train, const FormulateOptions& opt) {
    // One requirement per failure. Multiple causal labels for the same
    // failure were already merged upstream, so each requirement keeps the
    // keywords of exactly one case and retrieval stays archetype-specific.
    std::vector<Requirement> out;
    int idx = 0;
    for (const auto& c : causes) {
        Requirement r;
        r.id = opt.id_prefix + "_" + std::to_string(idx++);
        r.label = c.label;
        r.failure_ids.push_back(c.scene_id);

        for (const auto& k : c.keywords) {
            if (static_cast<int>(r.keywords.size()) >= opt.max_keywords) break;
            r.keywords.push_back(k);
        }

        std::string kw_phrase;
        for (const auto& k : r.keywords) {
            if (!kw_phrase.empty()) kw_phrase += ", ";
            kw_phrase += k;
        }
        r.text = "synthesize " + r.label + " scenes featuring " + kw_phrase +
                 "; the planner must stay collision free";

        // Exemplar retrieval by keyword Jaccard, relaxed once if nothing
        // clears the bar.
        auto retrieve = [&](double delta) {
            std::vector<std::pair<double, std::string>> hits;
            for (const auto& s : train.scenes) {
                const double j = jaccard(r.keywords, s.keywords);
                if (j >= delta) hits.emplace_back(j, s.id);
            }
            std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            std::vector<std::string> ids;
            for (const auto& [j, id] : hits) {
                (void)j;
                if (static_cast<int>(ids.size()) >= opt.top_k) break;
                ids.push_back(id);
            }
            return ids;
        };
        r.delta_used = opt.delta;
        r.retrieved = retrieve(opt.delta);
        if (r.retrieved.empty()) {
            r.delta_used = opt.delta / 2.0;
            r.retrieved = retrieve(r.delta_used);
        }
        out.push_back(std::move(r));
    }
    return out;
}

void save_requirements(const std::vector<Requirement>& reqs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write requirements file: " + path);
    json header = {{"schema", "bevloop.requirements"},
                   {"version", 1},
                   {"count", static_cast<int>(reqs.size())}};
    out << header.dump() << "\n";
    for (const auto& r : reqs) {
        json j = {{"id", r.id},
                  {"label", r.label},
                  {"keywords", r.keywords},
                  {"text", r.text},
                  {"failure_ids", r.failure_ids},
                  {"retrieved", r.retrieved},
                  {"delta_used", r.delta_used}};
        out << j.dump() << "\n";
    }
}

std::vector<Requirement> load_requirements(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open requirements file: " + path);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty requirements file", 1);
    ++line_no;
    json header;
    try {
        header = json::parse(line);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), line_no);
    }
    if (header.value("schema", "") != "bevloop.requirements")
        throw ParseError("unexpected requirements schema", line_no);
    if (header.value("version", 0) != 1)
        throw ParseError("unsupported requirements version", line_no);
    const int count = header.value("count", -1);

    std::vector<Requirement> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad requirement record: ") + e.what(), line_no);
        }
        try {
            Requirement r;
            r.id = j.at("id").get<std::string>();
            r.label = j.at("label").get<std::string>();
            r.keywords = j.at("keywords").get<std::vector<std::string>>();
            r.text = j.at("text").get<std::string>();
            r.failure_ids = j.at("failure_ids").get<std::vector<std::string>>();
            r.retrieved = j.at("retrieved").get<std::vector<std::string>>();
            r.delta_used = j.value("delta_used", kJaccardDelta);
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ParseError(std::string("requirement field error: ") + e.what(), line_no);
        }
    }
    if (count >= 0 && count != static_cast<int>(out.size()))
        throw ParseError("requirement count mismatch", line_no);
    return out;
}

}  // namespace bevloop::agent
