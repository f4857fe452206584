#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "bevloop/agent/analyzer.hpp"
#include "bevloop/loop/distribution.hpp"
#include "bevloop/taxonomy/cluster.hpp"
#include "bevloop/taxonomy/keywords.hpp"

using namespace bevloop;
using taxonomy::Embedding;

namespace {

Embedding axis(int i, double scale = 1.0) {
    Embedding e{};
    e[static_cast<size_t>(i)] = scale;
    return e;
}

}  // namespace

TEST_CASE("form embeddings live on the unit sphere and separate families") {
    for (const char* w : {"rain", "rainy", "pedestrian", "fog"}) {
        const Embedding e = taxonomy::form_embedding(w);
        double n = 0.0;
        for (double v : e) n += v * v;
        CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-9));
    }
    const double close = taxonomy::euclidean(taxonomy::form_embedding("rain"),
                                             taxonomy::form_embedding("rainy"));
    const double far = taxonomy::euclidean(taxonomy::form_embedding("rain"),
                                           taxonomy::form_embedding("pedestrian"));
    CHECK(close < taxonomy::kFuzzyMergeThreshold);
    CHECK(far > taxonomy::kFuzzyMergeThreshold);
}

TEST_CASE("fuzzy merge folds near duplicates onto the most frequent form") {
    // a and b coincide, c sits orthogonal; sqrt(2) apart beats any threshold.
    std::map<std::string, Embedding> emb{
        {"brakes", axis(0)}, {"braking", axis(0)}, {"curb", axis(1)}};
    auto res = taxonomy::fuzzy_merge({{"braking", 3}, {"brakes", 5}, {"curb", 2}}, emb, 0.5);
    CHECK(res.canonical.at("braking") == "brakes");
    CHECK(res.canonical.at("brakes") == "brakes");
    CHECK(res.canonical.at("curb") == "curb");
    REQUIRE(res.merged.size() == 2);
    CHECK(res.merged[0] == std::pair<std::string, int>{"brakes", 8});
    CHECK(res.merged[1] == std::pair<std::string, int>{"curb", 2});

    // Frequency tie breaks toward the lexicographically smaller form.
    std::map<std::string, Embedding> tie{{"mist", axis(2)}, {"misty", axis(2)}};
    auto res2 = taxonomy::fuzzy_merge({{"misty", 4}, {"mist", 4}}, tie, 0.5);
    CHECK(res2.canonical.at("misty") == "mist");
}

TEST_CASE("average linkage heights match the hand computation") {
    // 1d points 0, 1, 3: merge (0,1) at 1, then average of 3 and 2 gives 2.5.
    std::vector<Embedding> pts{axis(0, 0.0), axis(0, 1.0), axis(0, 3.0)};
    auto h = taxonomy::average_linkage_heights(pts);
    REQUIRE(h.size() == 2);
    CHECK(h[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h[1] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("select_k finds the obvious cluster count") {
    std::vector<Embedding> pts;
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < 4; ++j) pts.push_back(axis(c));
    CHECK(taxonomy::select_k(pts) == 3);

    CHECK(taxonomy::select_k({axis(0), axis(1)}) == 2);
    CHECK(taxonomy::select_k({axis(0)}) == 1);
    CHECK(taxonomy::select_k({axis(5), axis(5), axis(5), axis(5)}) == 1);
}

TEST_CASE("kmeans recovers separated pairs and is deterministic") {
    std::vector<Embedding> pts{axis(0, 1.0), axis(0, 1.2), axis(1, 1.0),
                               axis(1, 1.2), axis(2, 1.0), axis(2, 1.2)};
    auto r = taxonomy::kmeans(pts, 3, 7);
    REQUIRE(r.assignment.size() == 6);
    CHECK(r.assignment[0] == r.assignment[1]);
    CHECK(r.assignment[2] == r.assignment[3]);
    CHECK(r.assignment[4] == r.assignment[5]);
    CHECK(r.assignment[0] != r.assignment[2]);
    CHECK(r.assignment[2] != r.assignment[4]);
    // Each pair contributes twice the squared half-gap: 2 * 0.1^2.
    CHECK(r.objective == doctest::Approx(3 * 2 * 0.01).epsilon(1e-9));

    auto r2 = taxonomy::kmeans(pts, 3, 7);
    CHECK(r2.assignment == r.assignment);
    CHECK(r2.objective == doctest::Approx(r.objective).epsilon(1e-12));
}

TEST_CASE("context embeddings pull co-occurring keywords together") {
    std::vector<std::vector<std::string>> sets{
        {"rain", "glare"}, {"rain", "glare"}, {"curb", "pothole"}, {"curb", "pothole"}};
    auto ctx = taxonomy::context_embeddings(sets);
    const double within = taxonomy::euclidean(ctx.at("rain"), ctx.at("glare"));
    const double across = taxonomy::euclidean(ctx.at("rain"), ctx.at("curb"));
    CHECK(within < across);
}

TEST_CASE("summarize_label takes the majority category") {
    CHECK(taxonomy::summarize_label({"rain", "fog", "pedestrian"}) == "Weather");
    CHECK(taxonomy::summarize_label({"zzz_unknown"}) == "Uncategorized");
}

TEST_CASE("bundled annotations produce the frozen taxonomy") {
    auto annos = taxonomy::load_annotations("data/annotations_27.jsonl");
    REQUIRE(annos.size() == 27);

    taxonomy::MockExtractor ex;
    std::set<std::string> surface;
    for (const auto& a : annos)
        for (const auto& k : taxonomy::extract_keywords(a, ex)) surface.insert(k);
    CHECK(surface.size() == 42);

    auto tax = taxonomy::build_taxonomy(annos, ex);
    CHECK(tax.vocabulary.size() == 32);
    REQUIRE(tax.k == 3);
    std::vector<std::string> labels = tax.labels;
    std::sort(labels.begin(), labels.end());
    CHECK(labels == std::vector<std::string>{"Background", "Foreground", "Weather"});

    // Membership spot checks across the three clusters.
    CHECK(tax.label_of("fog") == "Weather");
    CHECK(tax.label_of("rainy") == "Weather");  // surface form resolves too
    CHECK(tax.label_of("pothole") == "Background");
    CHECK(tax.label_of("cut_in") == "Foreground");
    CHECK(tax.label_of("not_a_keyword").empty());

    const std::string dir = (std::filesystem::temp_directory_path() / "tax_rt").string();
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/taxonomy.json";
    taxonomy::save_taxonomy(tax, path);
    auto back = taxonomy::load_taxonomy(path);
    CHECK(back.k == tax.k);
    CHECK(back.vocabulary == tax.vocabulary);
    CHECK(back.clusters == tax.clusters);
    CHECK(back.labels == tax.labels);
    CHECK(back.canonical == tax.canonical);
}

TEST_CASE("two stage analysis beats the collapsed query on the bundled set") {
    auto annos = taxonomy::load_annotations("data/annotations_27.jsonl");
    std::set<std::string> ls;
    for (const auto& a : annos) ls.insert(a.gt_label);
    std::vector<std::string> labels(ls.begin(), ls.end());

    agent::MockAnalyzer an;
    auto ev = agent::evaluate_decomposition(an, annos, labels);
    CHECK(ev.two_step_accuracy == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev.one_step_accuracy == doctest::Approx(17.0 / 27.0).epsilon(1e-12));
    CHECK(ev.two_step_accuracy >= 0.9);
    CHECK(ev.one_step_accuracy < ev.two_step_accuracy);
}

TEST_CASE("support building and keyword distributions") {
    std::vector<std::vector<std::string>> sets{
        {"rain", "fog"}, {"rain", "curb"}, {"rain"}, {"fog"}};
    auto sup = loop::build_support(sets, 2);
    // rain:3 fog:2 curb:1, cap 2 keeps the two most frequent, sorted.
    CHECK(sup == std::vector<std::string>{"fog", "rain"});

    auto d = loop::distribution_on(sets, sup);
    REQUIRE(d.p.size() == 2);
    CHECK(d.p[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(d.p[1] == doctest::Approx(0.6).epsilon(1e-12));

    auto zero = loop::distribution_on({{"unrelated"}}, sup);
    CHECK(zero.p == std::vector<double>{0.0, 0.0});
}

TEST_CASE("hellinger distance matches closed forms") {
    loop::KeywordDistribution a{{"x", "y"}, {0.5, 0.5}};
    loop::KeywordDistribution b{{"x", "y"}, {0.25, 0.75}};
    loop::KeywordDistribution disjoint{{"x", "y"}, {1.0, 0.0}};
    loop::KeywordDistribution other{{"x", "y"}, {0.0, 1.0}};
    CHECK(loop::hellinger(a, a) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loop::hellinger(disjoint, other) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loop::hellinger(a, b) == doctest::Approx(0.1845928).epsilon(1e-4));
    CHECK(loop::hellinger(a, b) == doctest::Approx(loop::hellinger(b, a)).epsilon(1e-12));
}
