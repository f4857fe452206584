#include "bevloop/taxonomy/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "bevloop/common/error.hpp"
#include "bevloop/common/rng.hpp"
#include "json.hpp"

namespace bevloop::taxonomy {

using nlohmann::json;

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

MergeResult fuzzy_merge(const std::vector<std::pair<std::string, int>>& keyword_freq,
                        const std::map<std::string, Embedding>& embeddings, double threshold) {
    const int n = static_cast<int>(keyword_freq.size());
    std::vector<const Embedding*> emb(n);
    for (int i = 0; i < n; ++i) {
        auto it = embeddings.find(keyword_freq[i].first);
        if (it == embeddings.end())
            throw InvalidArgument("missing embedding for keyword: " + keyword_freq[i].first);
        emb[i] = &it->second;
    }

    UnionFind uf(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (euclidean(*emb[i], *emb[j]) <= threshold) uf.unite(i, j);
        }
    }

    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

    MergeResult out;
    for (const auto& [root, members] : groups) {
        (void)root;
        int best = members.front();
        int total = 0;
        for (int i : members) {
            total += keyword_freq[i].second;
            const bool better = keyword_freq[i].second > keyword_freq[best].second ||
                                (keyword_freq[i].second == keyword_freq[best].second &&
                                 keyword_freq[i].first < keyword_freq[best].first);
            if (better) best = i;
        }
        const std::string& canon = keyword_freq[best].first;
        for (int i : members) out.canonical[keyword_freq[i].first] = canon;
        out.merged.emplace_back(canon, total);
    }
    std::sort(out.merged.begin(), out.merged.end());
    return out;
}

std::vector<double> average_linkage_heights(const std::vector<Embedding>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 2) return {};

    // Active clusters as member index lists; average linkage distance is the
    // mean pairwise point distance between two clusters. n here is small
    // (keyword vocabularies), so the quadratic form is fine.
    std::vector<std::vector<int>> clusters(n);
    for (int i = 0; i < n; ++i) clusters[i] = {i};

    std::vector<std::vector<double>> pd(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pd[i][j] = pd[j][i] = euclidean(points[i], points[j]);

    auto linkage = [&](const std::vector<int>& a, const std::vector<int>& b) {
        double s = 0.0;
        for (int i : a)
            for (int j : b) s += pd[i][j];
        return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };

    std::vector<double> heights;
    while (clusters.size() > 1) {
        size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < clusters.size(); ++i) {
            for (size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = linkage(clusters[i], clusters[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        heights.push_back(best);
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<long>(bj));
    }
    // Average linkage is not guaranteed monotone; report sorted heights so
    // the elbow scan sees a proper profile.
    std::sort(heights.begin(), heights.end());
    return heights;
}

int select_k(const std::vector<Embedding>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) return n;

    const std::vector<double> h = average_linkage_heights(points);
    const double top = h.back();
    if (top < 1e-9) return 1;  // all points coincide

    // gap(K) is the height jump between the merge that would destroy K
    // clusters and the last merge performed while building them. The
    // largest jump is the elbow; ties prefer the smaller K.
    int best_k = 2;
    double best_gap = -1.0;
    for (int k = 2; k < n; ++k) {
        const double gap =
            h[static_cast<size_t>(n - k)] - h[static_cast<size_t>(n - k - 1)];
        if (gap > best_gap + 1e-12) {
            best_gap = gap;
            best_k = k;
        }
    }
    return best_k;
}

KmeansResult kmeans(const std::vector<Embedding>& points, int k, uint64_t seed) {
    const int n = static_cast<int>(points.size());
    if (k <= 0 || k > n) throw InvalidArgument("kmeans: k must be in [1, n]");

    auto sqdist = [](const Embedding& a, const Embedding& b) {
        double s = 0.0;
        for (int i = 0; i < kEmbedDim; ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return s;
    };

    // Farthest-point init, fully determined by the seed.
    Rng rng(hash_combine(seed, hash_str("kmeans_init")));
    std::vector<int> center_idx;
    center_idx.push_back(rng.uniform_int(0, n - 1));
    while (static_cast<int>(center_idx.size()) < k) {
        int far = -1;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
            double dmin = std::numeric_limits<double>::infinity();
            for (int c : center_idx) dmin = std::min(dmin, sqdist(points[i], points[c]));
            if (dmin > far_d + 1e-15) {
                far_d = dmin;
                far = i;
            }
        }
        center_idx.push_back(far);
    }

    KmeansResult r;
    r.centers.reserve(k);
    for (int c : center_idx) r.centers.push_back(points[c]);
    r.assignment.assign(n, -1);

    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = sqdist(points[i], r.centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sqdist(points[i], r.centers[c]);
                if (d < bd - 1e-15) {
                    bd = d;
                    best = c;
                }
            }
            if (best != r.assignment[i]) {
                r.assignment[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        std::vector<Embedding> sums(k, Embedding{});
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < kEmbedDim; ++d) sums[r.assignment[i]][d] += points[i][d];
            counts[r.assignment[i]] += 1;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed a starved cluster at the globally worst-fit point.
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = sqdist(points[i], r.centers[r.assignment[i]]);
                    if (d > far_d + 1e-15) {
                        far_d = d;
                        far = i;
                    }
                }
                r.centers[c] = points[far];
                continue;
            }
            for (int d = 0; d < kEmbedDim; ++d)
                r.centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }

    r.objective = 0.0;
    for (int i = 0; i < n; ++i) r.objective += sqdist(points[i], r.centers[r.assignment[i]]);
    return r;
}

const std::map<std::string, std::string>& category_table() {
    static const std::map<std::string, std::string> kTable = {
        {"rain", "Weather"},          {"rainy", "Weather"},
        {"night", "Weather"},         {"fog", "Weather"},
        {"foggy", "Weather"},         {"snow", "Weather"},
        {"snowy", "Weather"},         {"glare", "Weather"},
        {"low_visibility", "Weather"}, {"wet_road", "Weather"},
        {"drizzle", "Weather"},       {"overcast", "Weather"},
        {"backlight", "Weather"},     {"mist", "Weather"},
        {"slippery_road", "Weather"},

        {"pedestrian", "Foreground"}, {"pedestrians", "Foreground"},
        {"jaywalking", "Foreground"}, {"jaywalker", "Foreground"},
        {"cyclist", "Foreground"},
        {"cut_in", "Foreground"},     {"dense_traffic", "Foreground"},
        {"sudden_brake", "Foreground"}, {"tailgating", "Foreground"},
        {"oncoming_vehicle", "Foreground"}, {"motorcycle", "Foreground"},
        {"slow_vehicle", "Foreground"}, {"crossing", "Foreground"},
        {"stalled_vehicle", "Foreground"},
        {"vehicle", "Foreground"},    {"vulnerable_road_user", "Foreground"},
        {"slow_traffic", "Foreground"}, {"lane_follow", "Foreground"},

        {"curb", "Background"},       {"curbs", "Background"},
        {"construction", "Background"}, {"road_edge", "Background"},
        {"barrier", "Background"},    {"barriers", "Background"},
        {"narrow_lane", "Background"}, {"intersection", "Background"},
        {"merge_lane", "Background"}, {"faded_markings", "Background"},
        {"pothole", "Background"},    {"potholes", "Background"},
        {"debris", "Background"},
    };
    return kTable;
}

std::string summarize_label(const std::vector<std::string>& cluster_keywords) {
    std::map<std::string, int> votes;
    for (const auto& k : cluster_keywords) {
        auto it = category_table().find(k);
        if (it != category_table().end()) votes[it->second] += 1;
    }
    if (votes.empty()) return "Uncategorized";
    // std::map iterates lexicographically, so > keeps the smaller name on ties.
    std::string best;
    int best_n = 0;
    for (const auto& [label, n] : votes) {
        if (n > best_n) {
            best = label;
            best_n = n;
        }
    }
    return best;
}

std::string FailureTaxonomy::label_of(const std::string& keyword) const {
    auto it = canonical.find(keyword);
    const std::string& canon = it != canonical.end() ? it->second : keyword;
    for (size_t c = 0; c < clusters.size(); ++c) {
        for (const auto& k : clusters[c]) {
            if (k == canon) return labels[c];
        }
    }
    return "";
}

FailureTaxonomy build_taxonomy(const std::vector<Annotation>& annotations,
                               const KeywordExtractor& extractor, double fuzzy_threshold,
                               uint64_t seed) {
    // Frequencies count per description (they pick canonical forms); the
    // co-occurrence sets are per failure case, one union over its
    // descriptions, which is what ties a family's keywords together.
    std::vector<std::vector<std::string>> sets;
    std::map<std::string, int> freq;
    for (const auto& a : annotations) {
        for (const auto& d : a.descriptions) {
            for (const auto& k : extractor.extract(d)) freq[k] += 1;
        }
        auto kws = extract_keywords(a, extractor);
        if (!kws.empty()) sets.push_back(std::move(kws));
    }

    std::vector<std::pair<std::string, int>> keyword_freq(freq.begin(), freq.end());
    std::map<std::string, Embedding> form;
    for (const auto& [k, f] : keyword_freq) {
        (void)f;
        form.emplace(k, form_embedding(k));
    }
    MergeResult merge = fuzzy_merge(keyword_freq, form, fuzzy_threshold);

    FailureTaxonomy t;
    t.canonical = merge.canonical;
    for (const auto& [k, f] : merge.merged) {
        (void)f;
        t.vocabulary.push_back(k);
    }

    if (t.vocabulary.empty()) return t;

    // Rewrite the co-occurrence sets in canonical terms before embedding.
    std::vector<std::vector<std::string>> canon_sets;
    canon_sets.reserve(sets.size());
    for (const auto& s : sets) {
        std::vector<std::string> cs;
        std::set<std::string> seen;
        for (const auto& k : s) {
            const std::string& c = merge.canonical.at(k);
            if (seen.insert(c).second) cs.push_back(c);
        }
        canon_sets.push_back(std::move(cs));
    }
    const auto ctx = context_embeddings(canon_sets);

    std::vector<Embedding> points;
    points.reserve(t.vocabulary.size());
    for (const auto& k : t.vocabulary) points.push_back(ctx.at(k));

    t.k = select_k(points);
    KmeansResult km = kmeans(points, t.k, seed);

    t.clusters.assign(static_cast<size_t>(t.k), {});
    for (size_t i = 0; i < points.size(); ++i)
        t.clusters[static_cast<size_t>(km.assignment[i])].push_back(t.vocabulary[i]);
    for (auto& c : t.clusters) std::sort(c.begin(), c.end());
    for (const auto& c : t.clusters) t.labels.push_back(summarize_label(c));
    return t;
}

void save_taxonomy(const FailureTaxonomy& t, const std::string& path) {
    json j;
    j["schema"] = "bevloop.taxonomy";
    j["version"] = 1;
    j["k"] = t.k;
    j["vocabulary"] = t.vocabulary;
    j["canonical"] = t.canonical;
    json clusters = json::array();
    for (size_t c = 0; c < t.clusters.size(); ++c) {
        clusters.push_back({{"label", t.labels[c]}, {"keywords", t.clusters[c]}});
    }
    j["clusters"] = clusters;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write taxonomy file: " + path);
    out << j.dump(2) << "\n";
}

FailureTaxonomy load_taxonomy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open taxonomy file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad taxonomy json: ") + e.what(), 1);
    }
    if (j.value("schema", "") != "bevloop.taxonomy") throw ParseError("unexpected taxonomy schema", 1);
    if (j.value("version", 0) != 1) throw ParseError("unsupported taxonomy version", 1);
    FailureTaxonomy t;
    t.k = j.at("k").get<int>();
    t.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    t.canonical = j.at("canonical").get<std::map<std::string, std::string>>();
    for (const auto& c : j.at("clusters")) {
        t.labels.push_back(c.at("label").get<std::string>());
        t.clusters.push_back(c.at("keywords").get<std::vector<std::string>>());
    }
    if (static_cast<int>(t.clusters.size()) != t.k) throw ParseError("taxonomy cluster count mismatch", 1);
    return t;
}

}  // namespace bevloop::taxonomy
