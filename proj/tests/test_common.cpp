#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bevloop/common/error.hpp"
#include "bevloop/common/ini.hpp"
#include "bevloop/common/png.hpp"
#include "bevloop/common/rng.hpp"

using namespace bevloop;

TEST_CASE("rng streams are deterministic and independent of call order") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // Derived streams depend only on (seed, tag), not on what ran before.
    Rng c = Rng::derive(7, "weights");
    (void)Rng::derive(7, "noise").next_u64();
    Rng d = Rng::derive(7, "weights");
    CHECK(c.next_u64() == d.next_u64());
    CHECK(Rng::derive(7, "weights").next_u64() != Rng::derive(7, "noise").next_u64());
}

TEST_CASE("rng uniform and gaussian have sane ranges and moments") {
    Rng r(3);
    double sum = 0, sum2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double g = r.gaussian();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::fabs(sum / n) < 0.03);
    CHECK(std::fabs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("rng uniform_int covers both endpoints") {
    Rng r(9);
    bool lo = false, hi = false;
    for (int i = 0; i < 1000; ++i) {
        const int x = static_cast<int>(r.uniform_int(2, 5));
        CHECK(x >= 2);
        CHECK(x <= 5);
        lo = lo || x == 2;
        hi = hi || x == 5;
    }
    CHECK(lo);
    CHECK(hi);
}

TEST_CASE("hash_str differs across strings, stable across calls") {
    CHECK(hash_str("abc") == hash_str("abc"));
    CHECK(hash_str("abc") != hash_str("abd"));
    CHECK(hash_combine(1, 2) != hash_combine(2, 1));
}

TEST_CASE("ini parses sections, comments, and typed values") {
    const std::string text =
        "# top comment\n"
        "[run]\n"
        "out = runs/x   ; trailing comment\n"
        "seed = 11\n"
        "rate = 0.25\n"
        "flag = true\n"
        "\n"
        "[mix]\n"
        "weights = a:0.7, b:0.3\n"
        "horizons = 1, 2, 3\n";
    const Config cfg = Config::parse_string(text);
    CHECK(cfg.get("run", "out") == "runs/x");
    CHECK(cfg.get_int("run", "seed") == 11);
    CHECK(cfg.get_real("run", "rate") == doctest::Approx(0.25));
    CHECK(cfg.get_bool_or("run", "flag", false));
    CHECK(cfg.get_or("run", "missing", "dflt") == "dflt");
    CHECK(cfg.get_int_or("run", "missing", 5) == 5);

    const auto w = cfg.get_weighted_list("mix", "weights");
    REQUIRE(w.size() == 2);
    CHECK(w[0].first == "a");
    CHECK(w[0].second == doctest::Approx(0.7));
    const auto h = cfg.get_real_list_or("mix", "horizons", {});
    REQUIRE(h.size() == 3);
    CHECK(h[2] == doctest::Approx(3.0));
}

TEST_CASE("ini missing key throws, missing file throws") {
    const Config cfg = Config::parse_string("[a]\nx = 1\n");
    CHECK_THROWS_AS((void)cfg.get("a", "y"), InvalidArgument);
    CHECK_THROWS_AS((void)cfg.get_int("a", "x2"), InvalidArgument);
    CHECK_THROWS(Config::parse_file("/nonexistent/path.ini"));
}

TEST_CASE("png encoder emits a well-formed grayscale file") {
    // 2x2 checker; verify signature, IHDR geometry, and IEND trailer.
    const uint8_t px[4] = {0, 255, 255, 0};
    const std::vector<uint8_t> png = encode_png(px, 2, 2, 1);
    REQUIRE(png.size() > 45);
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    for (int i = 0; i < 8; ++i) CHECK(png[i] == sig[i]);
    // IHDR starts at offset 8 + 4 length bytes; width/height are big-endian
    // at offsets 16..23.
    CHECK(png[16 + 3] == 2);
    CHECK(png[20 + 3] == 2);
    const std::string tail(png.end() - 8, png.end() - 4);
    CHECK(tail == "IEND");
}

TEST_CASE("base64 round trips through the reference alphabet") {
    CHECK(base64_encode({}) == "");
    CHECK(base64_encode({'M'}) == "TQ==");
    CHECK(base64_encode({'M', 'a'}) == "TWE=");
    CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
    const std::vector<uint8_t> s{'l', 'i', 'g', 'h', 't', ' ', 'w', 'o', 'r', 'k', '.'};
    CHECK(base64_encode(s) == "bGlnaHQgd29yay4=");
}
