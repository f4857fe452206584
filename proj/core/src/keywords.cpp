#include "bevloop/taxonomy/keywords.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"
#include "json.hpp"

namespace bevloop::taxonomy {

using nlohmann::json;

double euclidean(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (int i = 0; i < kEmbedDim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<Annotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotations file: " + path);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty annotations file", 1);
    ++line_no;
    json header;
    try {
        header = json::parse(line);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), line_no);
    }
    if (header.value("schema", "") != "bevloop.annotations")
        throw ParseError("unexpected annotations schema", line_no);
    if (header.value("version", 0) != 1)
        throw ParseError("unsupported annotations version", line_no);
    const int count = header.value("count", -1);

    std::vector<Annotation> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad annotation record: ") + e.what(), line_no);
        }
        try {
            Annotation a;
            a.scene_id = j.at("scene_id").get<std::string>();
            for (const auto& d : j.at("descriptions")) a.descriptions.push_back(d.get<std::string>());
            const auto& t = j.at("tags");
            a.tags.weather = scene::weather_from_string(t.at("weather").get<std::string>());
            a.tags.time_of_day = scene::time_of_day_from_string(t.at("time_of_day").get<std::string>());
            a.tags.density = scene::density_from_string(t.at("density").get<std::string>());
            a.collider_cls = scene::object_class_from_string(j.at("collider_class").get<std::string>());
            a.gt_label = j.value("gt_label", "");
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw ParseError(std::string("annotation field error: ") + e.what(), line_no);
        }
    }
    if (count >= 0 && count != static_cast<int>(out.size()))
        throw ParseError("annotation count mismatch: header says " + std::to_string(count) +
                             ", file has " + std::to_string(out.size()),
                         line_no);
    return out;
}

namespace {

const std::set<std::string>& stoplist() {
    static const std::set<std::string> kStop = {
        "a",    "an",   "and",  "at",   "by",   "for", "from", "in",   "into", "of",
        "off",  "on",   "our",  "out",  "over", "the", "then", "to",   "us",   "with",
        "was",  "were", "is",   "are",  "it",   "its", "very", "near", "both", "while",
        "road", "lane", "car",  "cars", "truck"};
    return kStop;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            toks.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) toks.push_back(cur);
    return toks;
}

}  // namespace

const std::map<std::string, std::string>& MockExtractor::lexicon() {
    // Surface token -> emitted keyword form. Deliberately keeps several
    // morphological variants distinct (rainy, foggy, curbs, ...); those are
    // merged later by embedding distance, not here.
    static const std::map<std::string, std::string> kLex = {
        // weather and light
        {"rain", "rain"},
        {"rainy", "rainy"},
        {"downpour", "rain"},
        {"night", "night"},
        {"dark", "night"},
        {"unlit", "night"},
        {"fog", "fog"},
        {"foggy", "foggy"},
        {"snow", "snow"},
        {"snowy", "snowy"},
        {"glare", "glare"},
        {"headlight", "glare"},
        {"visibility", "low_visibility"},
        {"wet", "wet_road"},
        {"slick", "wet_road"},
        {"drizzle", "drizzle"},
        {"drizzling", "drizzling"},
        {"overcast", "overcast"},
        {"backlit", "backlight"},
        {"backlight", "backlight"},
        {"mist", "mist"},
        {"misty", "misty"},
        // road users
        {"pedestrian", "pedestrian"},
        {"pedestrians", "pedestrians"},
        {"people", "pedestrians"},
        {"jaywalker", "jaywalker"},
        {"jaywalking", "jaywalking"},
        {"cyclist", "cyclist"},
        {"bike", "cyclist"},
        {"cut", "cut_in"},
        {"dense", "dense_traffic"},
        {"congested", "dense_traffic"},
        {"queue", "dense_traffic"},
        {"platoon", "dense_traffic"},
        {"brake", "sudden_brake"},
        {"braked", "sudden_brake"},
        {"braking", "sudden_brake"},
        {"tailgating", "tailgating"},
        {"tailgater", "tailgating"},
        {"oncoming", "oncoming_vehicle"},
        {"motorcycle", "motorcycle"},
        {"slow", "slow_vehicle"},
        {"crossing", "crossing"},
        {"crosswalk", "crossing"},
        // road structure
        {"curb", "curb"},
        {"curbs", "curbs"},
        {"construction", "construction"},
        {"cones", "construction"},
        {"edge", "road_edge"},
        {"shoulder", "road_edge"},
        {"dropoff", "road_edge"},
        {"barrier", "barrier"},
        {"barriers", "barriers"},
        {"jersey", "barrier"},
        {"narrow", "narrow_lane"},
        {"narrowed", "narrow_lane"},
        {"underpass", "narrow_lane"},
        {"intersection", "intersection"},
        {"junction", "intersection"},
        {"merge", "merge_lane"},
        {"ramp", "merge_lane"},
        {"faded", "faded_markings"},
        {"markings", "faded_markings"},
        {"paint", "faded_markings"},
        {"pothole", "pothole"},
        {"potholes", "potholes"},
        {"debris", "debris"},
        {"gravel", "debris"},
        // keywords already in canonical form pass through
        {"cut_in", "cut_in"},
        {"low_visibility", "low_visibility"},
        {"stalled_vehicle", "stalled_vehicle"},
        {"stalled", "stalled_vehicle"},
        {"slippery_road", "slippery_road"},
        {"slippery", "slippery_road"},
        {"vehicle", "vehicle"},
        {"vulnerable_road_user", "vulnerable_road_user"},
        {"lane_follow", "lane_follow"},
        {"dense_traffic", "dense_traffic"},
        {"slow_traffic", "slow_traffic"},
    };
    return kLex;
}

std::vector<std::string> MockExtractor::extract(const std::string& text) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    const auto& lex = lexicon();
    for (const auto& tok : tokenize(text)) {
        if (stoplist().count(tok)) continue;
        auto it = lex.find(tok);
        if (it == lex.end()) continue;
        if (seen.insert(it->second).second) out.push_back(it->second);
    }
    return out;
}

std::vector<std::string> extract_keywords(const Annotation& annotation,
                                          const KeywordExtractor& extractor) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& d : annotation.descriptions) {
        for (auto& k : extractor.extract(d)) {
            if (seen.insert(k).second) out.push_back(k);
        }
    }
    return out;
}

namespace {

void normalize(Embedding& e) {
    double n = 0.0;
    for (double v : e) n += v * v;
    n = std::sqrt(n);
    if (n < 1e-12) {
        e[0] = 1.0;
        return;
    }
    for (double& v : e) v /= n;
}

// A stable pseudo-random direction for one string feature, spread over four
// signed dims so a single hash collision cannot swing pair distances much.
void add_hashed_direction(Embedding& e, const std::string& feature, double weight) {
    uint64_t h = hash_str(feature);
    for (int r = 0; r < 4; ++r) {
        h = splitmix64(h);
        const int dim = static_cast<int>(h % kEmbedDim);
        const double sign = ((h >> 17) & 1) ? 1.0 : -1.0;
        e[dim] += sign * weight * 0.5;
    }
}

}  // namespace

Embedding form_embedding(const std::string& word) {
    Embedding e{};
    // Anchored prefixes keep shared stems dominant: "rain" and "rainy" share
    // 4 of their 4/5 features, unrelated words share at most a first letter.
    for (size_t n = 1; n <= word.size(); ++n) {
        add_hashed_direction(e, "^" + word.substr(0, n), 1.0);
    }
    normalize(e);
    return e;
}

std::map<std::string, Embedding> context_embeddings(
    const std::vector<std::vector<std::string>>& keyword_sets, double self_weight) {
    // Axis per keyword (exact while the vocabulary fits kEmbedDim, hashed
    // fold-over beyond that), then a few diffusion passes through the
    // co-occurrence graph: v <- normalize(self_weight*v + sum_j c_kj v_j).
    // Keywords of one failure family converge toward their component's
    // dominant direction (so they agree even without direct co-occurrence)
    // while disconnected families stay orthogonal. The self term keeps
    // mirror-neighborhood keywords from collapsing onto each other.
    std::set<std::string> vocab;
    std::map<std::string, std::map<std::string, int>> cooc;
    for (const auto& set : keyword_sets) {
        for (const auto& a : set) {
            vocab.insert(a);
            for (const auto& b : set) {
                if (a != b) cooc[a][b] += 1;
            }
        }
    }

    std::map<std::string, int> axis;
    int next = 0;
    for (const auto& k : vocab) axis[k] = next++ % kEmbedDim;

    std::map<std::string, Embedding> v;
    for (const auto& k : vocab) {
        Embedding e{};
        e[axis[k]] = 1.0;
        v.emplace(k, e);
    }

    constexpr int kPasses = 4;
    for (int pass = 0; pass < kPasses; ++pass) {
        std::map<std::string, Embedding> nv;
        for (const auto& k : vocab) {
            Embedding e{};
            for (int i = 0; i < kEmbedDim; ++i) e[i] = self_weight * v[k][i];
            auto it = cooc.find(k);
            if (it != cooc.end()) {
                for (const auto& [other, n] : it->second) {
                    const Embedding& d = v[other];
                    for (int i = 0; i < kEmbedDim; ++i) e[i] += static_cast<double>(n) * d[i];
                }
            }
            normalize(e);
            nv.emplace(k, e);
        }
        v = std::move(nv);
    }
    return v;
}

}  // namespace bevloop::taxonomy
