#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bevloop/forge/forge.hpp"
#include "bevloop/planner/metrics.hpp"
#include "bevloop/scene/dataset_io.hpp"

using namespace bevloop;
using forge::ForgeSpec;

namespace {

ForgeSpec small_spec() {
    ForgeSpec spec;
    spec.name = "t";
    spec.n_scenes = 40;
    spec.mixture = {{"nominal", 0.5},
                    {"night_low_visibility", 0.125},
                    {"dense_cut_in", 0.125},
                    {"pedestrian_crossing", 0.125},
                    {"rain_slow_traffic", 0.125}};
    spec.seed = 11;
    return spec;
}

}  // namespace

TEST_CASE("largest-remainder allocation sums exactly and favors order on ties") {
    // 0.94 + 4 * 0.015 over 400: floors 376 + 4*6 = 400 already.
    std::vector<std::pair<std::string, double>> mix = {
        {"a", 0.94}, {"b", 0.015}, {"c", 0.015}, {"d", 0.015}, {"e", 0.015}};
    auto counts = forge::allocate_counts(mix, 400);
    REQUIRE(counts.size() == 5);
    CHECK(counts[0] == 376);
    for (int i = 1; i < 5; ++i) CHECK(counts[i] == 6);

    // 1/3 each over 10 -> floors 3,3,3 and one remainder goes to the first.
    counts = forge::allocate_counts({{"a", 1}, {"b", 1}, {"c", 1}}, 10);
    CHECK(counts[0] == 4);
    CHECK(counts[1] == 3);
    CHECK(counts[2] == 3);

    int total = 0;
    counts = forge::allocate_counts({{"a", 0.21}, {"b", 0.37}, {"c", 0.42}}, 97);
    for (int c : counts) total += c;
    CHECK(total == 97);
}

TEST_CASE("forging is deterministic for a fixed spec") {
    const scene::Dataset d1 = forge::forge_dataset(small_spec());
    const scene::Dataset d2 = forge::forge_dataset(small_spec());
    REQUIRE(d1.size() == 40);
    REQUIRE(d1.size() == d2.size());
    for (size_t i = 0; i < d1.size(); ++i) {
        CHECK(d1.scenes[i].id == d2.scenes[i].id);
        CHECK(d1.scenes[i].archetype == d2.scenes[i].archetype);
        REQUIRE(d1.scenes[i].ego.steps() == d2.scenes[i].ego.steps());
        for (size_t t = 0; t < d1.scenes[i].ego.steps(); ++t) {
            CHECK(d1.scenes[i].ego.poses[t].x == d2.scenes[i].ego.poses[t].x);
            CHECK(d1.scenes[i].ego.poses[t].y == d2.scenes[i].ego.poses[t].y);
        }
    }

    ForgeSpec other = small_spec();
    other.seed = 12;
    const scene::Dataset d3 = forge::forge_dataset(other);
    bool any_differs = false;
    for (size_t i = 0; i < d1.size() && !any_differs; ++i)
        any_differs = d1.scenes[i].ego.poses.back().x != d3.scenes[i].ego.poses.back().x;
    CHECK(any_differs);
}

TEST_CASE("forged mixture matches the allocation and ids are unique") {
    const scene::Dataset d = forge::forge_dataset(small_spec());
    std::map<std::string, int> by_arch;
    std::set<std::string> ids;
    for (const auto& s : d.scenes) {
        by_arch[s.archetype] += 1;
        ids.insert(s.id);
    }
    CHECK(ids.size() == d.size());
    CHECK(by_arch["nominal"] == 20);
    CHECK(by_arch["night_low_visibility"] == 5);
    CHECK(by_arch["dense_cut_in"] == 5);
    CHECK(by_arch["pedestrian_crossing"] == 5);
    CHECK(by_arch["rain_slow_traffic"] == 5);
}

TEST_CASE("every forged expert trajectory is failure free at spec eps") {
    const ForgeSpec spec = small_spec();
    const scene::Dataset d = forge::forge_dataset(spec);
    for (const auto& s : d.scenes) {
        const auto hit = planner::earliest_collision(s.ego, s.objects, spec.eps,
                                                     int(s.ego.steps()) - 1);
        CHECK(hit.step == -1);
    }
}

TEST_CASE("hazard archetypes carry their signature tags and keywords") {
    const scene::Dataset d = forge::forge_dataset(small_spec());
    for (const auto& s : d.scenes) {
        if (s.archetype == "night_low_visibility") {
            CHECK(s.tags.time_of_day == scene::TimeOfDay::night);
            CHECK(std::find(s.keywords.begin(), s.keywords.end(), "night") != s.keywords.end());
        } else if (s.archetype == "rain_slow_traffic") {
            CHECK(s.tags.weather == scene::Weather::rain);
        } else if (s.archetype == "pedestrian_crossing") {
            bool has_ped = false;
            for (const auto& o : s.objects)
                has_ped = has_ped || o.cls == scene::ObjectClass::pedestrian;
            CHECK(has_ped);
        }
        CHECK_FALSE(s.caption.empty());
        CHECK_FALSE(s.keywords.empty());
    }
}

TEST_CASE("keyword harvesting folds surface forms and drops unknown tokens") {
    const auto kws = forge::harvest_keywords(
        "The EGO nearly hit a STALLED car at night; visibility was poor, xyzzy.");
    CHECK(std::find(kws.begin(), kws.end(), "stalled_vehicle") != kws.end());
    CHECK(std::find(kws.begin(), kws.end(), "night") != kws.end());
    CHECK(std::find(kws.begin(), kws.end(), "xyzzy") == kws.end());
    // Idempotent on duplicates.
    const auto twice = forge::harvest_keywords("night night");
    CHECK(twice.size() == 1);
}

TEST_CASE("dataset json round trip preserves content") {
    namespace fs = std::filesystem;
    const scene::Dataset d = forge::forge_dataset(small_spec());
    const fs::path dir = fs::temp_directory_path() / "bevloop_forge_roundtrip";
    fs::create_directories(dir);
    const std::string path = (dir / "scenes.jsonl").string();
    scene::save_dataset(d, path);
    const scene::Dataset back = scene::load_dataset(path);
    REQUIRE(back.size() == d.size());
    CHECK(back.provenance == d.provenance);
    for (size_t i = 0; i < d.size(); ++i) {
        const auto& a = d.scenes[i];
        const auto& b = back.scenes[i];
        CHECK(a.id == b.id);
        CHECK(a.archetype == b.archetype);
        CHECK(a.caption == b.caption);
        CHECK(a.keywords == b.keywords);
        CHECK(a.target_speed == b.target_speed);
        REQUIRE(a.objects.size() == b.objects.size());
        for (size_t j = 0; j < a.objects.size(); ++j) {
            CHECK(a.objects[j].cls == b.objects[j].cls);
            CHECK(a.objects[j].traj.poses.size() == b.objects[j].traj.poses.size());
            CHECK(a.objects[j].traj.poses.back().x ==
                  doctest::Approx(b.objects[j].traj.poses.back().x));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("spec parses from config sections") {
    const Config cfg = Config::parse_string(
        "[train]\n"
        "name = seed_train\n"
        "n_scenes = 400\n"
        "mixture = nominal:0.94, night_low_visibility:0.015, dense_cut_in:0.015, "
        "pedestrian_crossing:0.015, rain_slow_traffic:0.015\n"
        "seed = 101\n");
    const ForgeSpec spec = ForgeSpec::from_config(cfg, "train");
    CHECK(spec.name == "seed_train");
    CHECK(spec.n_scenes == 400);
    CHECK(spec.seed == 101);
    REQUIRE(spec.mixture.size() == 5);
    CHECK(spec.mixture[0].first == "nominal");
    CHECK(spec.mixture[0].second == doctest::Approx(0.94));
}

TEST_CASE("unknown archetype in the mixture is rejected") {
    ForgeSpec spec = small_spec();
    spec.mixture.push_back({"volcano", 0.1});
    CHECK_THROWS(forge::forge_dataset(spec));
}
