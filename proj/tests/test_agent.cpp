#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "bevloop/agent/aide.hpp"
#include "bevloop/agent/analyzer.hpp"
#include "bevloop/agent/requirements.hpp"
#include "bevloop/taxonomy/cluster.hpp"
#include "bevloop/taxonomy/keywords.hpp"

using namespace bevloop;

namespace {

taxonomy::FailureRecord night_failure(const std::string& id) {
    taxonomy::FailureRecord r;
    r.scene_id = id;
    r.collision_step = 3;
    r.collision_time_s = 1.5f;
    r.collider_cls = scene::ObjectClass::pedestrian;
    r.collider_detected = false;
    r.tags.time_of_day = scene::TimeOfDay::night;
    r.archetype = "ped_crossing_night";
    r.scene_keywords = {"night", "pedestrian", "crossing"};
    return r;
}

taxonomy::FailureRecord rain_failure(const std::string& id) {
    taxonomy::FailureRecord r;
    r.scene_id = id;
    r.collision_step = 4;
    r.collision_time_s = 2.0f;
    r.collider_cls = scene::ObjectClass::vehicle;
    r.collider_detected = true;
    r.tags.weather = scene::Weather::rain;
    r.archetype = "rain_slick_merge";
    r.scene_keywords = {"rain", "merge_lane", "wet_road"};
    return r;
}

scene::BevScene keyword_scene(const std::string& id, std::vector<std::string> kws) {
    scene::BevScene s;
    s.id = id;
    s.keywords = std::move(kws);
    s.ego.poses.resize(7);
    return s;
}

taxonomy::FailureTaxonomy fixture_taxonomy() {
    auto annos = taxonomy::load_annotations("data/annotations_27.jsonl");
    taxonomy::MockExtractor ex;
    return taxonomy::build_taxonomy(annos, ex);
}

}  // namespace

TEST_CASE("jaccard counts set overlap") {
    CHECK(agent::jaccard({"a", "b", "c"}, {"b", "c", "d"}) == doctest::Approx(0.5));
    CHECK(agent::jaccard({"a", "b"}, {"a", "b", "c"}) == doctest::Approx(2.0 / 3.0));
    CHECK(agent::jaccard({}, {}) == doctest::Approx(0.0));
    CHECK(agent::jaccard({"a", "a", "b"}, {"a", "b"}) == doctest::Approx(1.0));
}

TEST_CASE("analysis merges co-occurring labels into one cause per failure") {
    auto tax = fixture_taxonomy();
    agent::MockAnalyzer an;
    std::vector<taxonomy::FailureRecord> fails{night_failure("f0"), rain_failure("f1")};
    auto causes = agent::analyze_failures(an, fails, tax);
    REQUIRE(causes.size() == 2);
    CHECK(causes[0].scene_id == "f0");
    CHECK(causes[1].scene_id == "f1");
    for (const auto& c : causes) {
        CHECK(!c.label.empty());
        CHECK(!c.keywords.empty());
        CHECK(!c.description.empty());
        // Merged labels stay sorted and unique around the separator.
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            size_t plus = c.label.find('+', start);
            parts.push_back(c.label.substr(start, plus - start));
            if (plus == std::string::npos) break;
            start = plus + 1;
        }
        CHECK(std::is_sorted(parts.begin(), parts.end()));
        CHECK(std::adjacent_find(parts.begin(), parts.end()) == parts.end());
    }
    // An undetected night pedestrian reads as a weather/visibility failure
    // as well as a foreground one.
    CHECK(causes[0].label.find("Weather") != std::string::npos);
    // Keywords come back canonical.
    for (const auto& k : causes[0].keywords) CHECK(!tax.label_of(k).empty());
}

TEST_CASE("formulate emits one requirement per failure and retrieves by overlap") {
    agent::FailureCause c0{"f0", "Weather", {"night", "pedestrian"}, "dark crossing"};
    agent::FailureCause c1{"f1", "Foreground", {"cut_in"}, "abrupt lane change"};

    scene::Dataset train;
    train.name = "train";
    train.scenes.push_back(keyword_scene("s0", {"night", "pedestrian", "crossing"}));
    train.scenes.push_back(keyword_scene("s1", {"night", "pedestrian"}));
    train.scenes.push_back(keyword_scene("s2", {"sunny", "cruise"}));
    train.scenes.push_back(keyword_scene("s3", {"cut_in", "dense_traffic"}));

    agent::FormulateOptions opt;
    opt.id_prefix = "it1";
    auto reqs = agent::formulate({c0, c1}, train, opt);
    REQUIRE(reqs.size() == 2);

    CHECK(reqs[0].id == "it1_0");
    CHECK(reqs[0].label == "Weather");
    CHECK(reqs[0].failure_ids == std::vector<std::string>{"f0"});
    // jaccard(s0) = 2/3, jaccard(s1) = 1, jaccard(s2) = 0.
    CHECK(reqs[0].retrieved == std::vector<std::string>{"s1", "s0"});
    CHECK(reqs[0].delta_used == doctest::Approx(agent::kJaccardDelta));
    CHECK(reqs[0].text.find("night") != std::string::npos);

    CHECK(reqs[1].id == "it1_1");
    CHECK(reqs[1].retrieved == std::vector<std::string>{"s3"});
}

TEST_CASE("formulate relaxes the bar once when nothing clears it") {
    agent::FailureCause c{"f0", "Background", {"pothole", "curb", "debris", "narrow_lane"}, "x"};
    scene::Dataset train;
    // Overlap 1/4 sits below delta 0.5 but clears the halved bar 0.25.
    train.scenes.push_back(keyword_scene("s0", {"pothole"}));
    auto reqs = agent::formulate({c}, train);
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].retrieved == std::vector<std::string>{"s0"});
    CHECK(reqs[0].delta_used == doctest::Approx(agent::kJaccardDelta / 2));
}

TEST_CASE("requirements survive a save and load round trip") {
    agent::Requirement r;
    r.id = "it2_5";
    r.label = "Weather+Foreground";
    r.keywords = {"night", "crossing"};
    r.text = "synthesize night scenes";
    r.failure_ids = {"f7", "f9"};
    r.retrieved = {"s1", "s4"};
    r.delta_used = 0.25;

    const std::string dir = (std::filesystem::temp_directory_path() / "req_rt").string();
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/requirements.jsonl";
    agent::save_requirements({r}, path);
    auto back = agent::load_requirements(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].id == r.id);
    CHECK(back[0].label == r.label);
    CHECK(back[0].keywords == r.keywords);
    CHECK(back[0].text == r.text);
    CHECK(back[0].failure_ids == r.failure_ids);
    CHECK(back[0].retrieved == r.retrieved);
    CHECK(back[0].delta_used == doctest::Approx(r.delta_used));
}

TEST_CASE("retrieval baseline copies exemplars verbatim up to the budget") {
    scene::Dataset train;
    train.scenes.push_back(keyword_scene("s0", {"night"}));
    train.scenes.push_back(keyword_scene("s1", {"rain"}));
    train.scenes.back().caption = "rain on the overpass";

    agent::Requirement r0;
    r0.id = "r0";
    r0.retrieved = {"s0", "s1"};
    agent::Requirement r1;
    r1.id = "r1";
    r1.retrieved = {"s1"};

    auto ds = agent::retrieval_baseline({r0, r1}, train, 3, "retr");
    CHECK(ds.provenance == "retrieved");
    REQUIRE(ds.scenes.size() == 3);
    // Round robin over requirements' lists: r0 s0, r1 s1, r0 s1.
    CHECK(ds.scenes[0].keywords == std::vector<std::string>{"night"});
    CHECK(ds.scenes[1].keywords == std::vector<std::string>{"rain"});
    CHECK(ds.scenes[2].caption == "rain on the overpass");
    std::set<std::string> ids;
    for (const auto& s : ds.scenes) ids.insert(s.id);
    CHECK(ids.size() == 3);
    for (const auto& s : ds.scenes) CHECK(s.id.rfind("retr", 0) == 0);
}
