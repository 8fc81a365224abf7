// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <bayerisp/common.hpp>
#include <bayerisp/image.hpp>

using namespace bayerisp;

TEST_CASE("pattern lookup accepts the four Bayer names in any case") {
    CHECK(pattern_of("rggb").name() == "RGGB");
    CHECK(pattern_of("BGGR").name() == "BGGR");
    CHECK(pattern_of("GrBg").name() == "GRBG");
    CHECK(pattern_of("gbrg").name() == "GBRG");
    CHECK_THROWS_AS(pattern_of("xtrans"), ValidationError);
    CHECK_THROWS_AS(pattern_of(""), ValidationError);
}

TEST_CASE("each 2x2 cell holds one red, one blue, two greens") {
    for (const char* name : {"RGGB", "BGGR", "GRBG", "GBRG"}) {
        const CfaPattern pat = pattern_of(name);
        int reds = 0, greens = 0, blues = 0;
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                switch (pat.color_at(y, x)) {
                    case Channel::R: ++reds; break;
                    case Channel::G: ++greens; break;
                    case Channel::B: ++blues; break;
                }
            }
        INFO(name);
        CHECK(reds == 1);
        CHECK(greens == 2);
        CHECK(blues == 1);
    }
}

TEST_CASE("color_at is 2-periodic in both directions") {
    const CfaPattern pat = pattern_of("GRBG");
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) CHECK(pat.color_at(y, x) == pat.color_at(y + 2, x + 2));
}

TEST_CASE("normalized channel order puts G1 on the red row") {
    for (const char* name : {"RGGB", "BGGR", "GRBG", "GBRG"}) {
        const CfaPattern pat = pattern_of(name);
        const auto offs = pat.normalized_offsets();
        INFO(name);
        // offs = {R, G1, G2, B}; G1 shares its row parity with R, G2 with B
        CHECK(pat.color_at(offs[0].row, offs[0].col) == Channel::R);
        CHECK(pat.color_at(offs[1].row, offs[1].col) == Channel::G);
        CHECK(pat.color_at(offs[2].row, offs[2].col) == Channel::G);
        CHECK(pat.color_at(offs[3].row, offs[3].col) == Channel::B);
        CHECK(offs[1].row == offs[0].row);
        CHECK(offs[2].row == offs[3].row);
    }
}

TEST_CASE("BayerImage rejects malformed construction") {
    const CfaPattern pat = pattern_of("RGGB");
    const std::vector<std::uint16_t> ok(4 * 4, 100);

    CHECK_THROWS_AS(BayerImage(3, 4, 8, std::vector<std::uint16_t>(12, 0), pat),
                    ValidationError);
    CHECK_THROWS_AS(BayerImage(4, 4, 7, ok, pat), ValidationError);
    CHECK_THROWS_AS(BayerImage(4, 4, 17, ok, pat), ValidationError);
    CHECK_THROWS_AS(BayerImage(4, 4, 8, std::vector<std::uint16_t>(16, 256), pat),
                    ValidationError);
    // levels must come as a pair and satisfy 0 <= black < white <= 2^b-1
    CHECK_THROWS_AS(BayerImage(4, 4, 12, ok, pat, 64, std::nullopt), ValidationError);
    CHECK_THROWS_AS(BayerImage(4, 4, 12, ok, pat, 4095, 64), ValidationError);
    CHECK_NOTHROW(BayerImage(4, 4, 12, ok, pat, 64, 4095));
}

TEST_CASE("BayerImage equality covers pattern, depth, levels, and samples") {
    const std::vector<std::uint16_t> s(4 * 4, 9);
    const BayerImage a(4, 4, 10, s, pattern_of("RGGB"), 16, 1000);
    CHECK(a == BayerImage(4, 4, 10, s, pattern_of("RGGB"), 16, 1000));
    CHECK_FALSE(a == BayerImage(4, 4, 10, s, pattern_of("BGGR"), 16, 1000));
    CHECK_FALSE(a == BayerImage(4, 4, 12, s, pattern_of("RGGB"), 16, 1000));
    CHECK_FALSE(a == BayerImage(4, 4, 10, s, pattern_of("RGGB")));
    auto t = s;
    t[5] = 10;
    CHECK_FALSE(a == BayerImage(4, 4, 10, t, pattern_of("RGGB"), 16, 1000));
}

TEST_CASE("ColorImage snaps round-off excursions and rejects real ones") {
    std::array<std::vector<double>, 3> planes;
    for (auto& p : planes) p.assign(4, 0.5);
    planes[0][0] = -1e-13;       // snapped to 0
    planes[1][1] = 1.0 + 1e-13;  // snapped to 1
    const ColorImage img(2, 2, planes, ColorState::SensorLinear);
    CHECK(img.planes()[0][0] == 0.0);
    CHECK(img.planes()[1][1] == 1.0);

    planes[2][2] = 1.01;
    CHECK_THROWS_AS(ColorImage(2, 2, planes, ColorState::SensorLinear), ValidationError);
}

TEST_CASE("constant factory fills all three planes") {
    const ColorImage img = ColorImage::constant(4, 6, 0.1, 0.2, 0.3, ColorState::DisplayReferred);
    CHECK(img.height() == 4);
    CHECK(img.width() == 6);
    for (double v : img.planes()[0]) CHECK(v == 0.1);
    for (double v : img.planes()[1]) CHECK(v == 0.2);
    for (double v : img.planes()[2]) CHECK(v == 0.3);
    CHECK(img.color_state() == ColorState::DisplayReferred);
}

TEST_CASE("quantize and dequantize invert each other on the integer grid") {
    for (int b : {8, 12, 16}) {
        const int m = max_sample(b);
        for (int s : {0, 1, m / 3, m - 1, m}) {
            CAPTURE(b, s);
            CHECK(quantize(dequantize(static_cast<std::uint16_t>(s), b), b) == s);
        }
        CHECK(quantize(-0.2, b) == 0);
        CHECK(quantize(1.2, b) == m);
    }
}

TEST_CASE("round_half_away breaks ties away from zero") {
    CHECK(round_half_away(0.5) == 1);
    CHECK(round_half_away(-0.5) == -1);
    CHECK(round_half_away(2.5) == 3);
    CHECK(round_half_away(2.4999) == 2);
}

TEST_CASE("per-file seeds are stable and decorrelated") {
    const std::uint64_t a = per_file_seed(42, "img0.png");
    CHECK(a == per_file_seed(42, "img0.png"));
    CHECK(a != per_file_seed(42, "img1.png"));
    CHECK(a != per_file_seed(43, "img0.png"));
}

TEST_CASE("sidecar metadata validation") {
    SidecarMeta meta;
    meta.pattern = "GBRG";
    meta.bit_depth = 14;
    CHECK_NOTHROW(meta.validate());
    meta.bit_depth = 6;
    CHECK_THROWS_AS(meta.validate(), ValidationError);
    meta.bit_depth = 12;
    meta.pattern = "RGBW";
    CHECK_THROWS_AS(meta.validate(), ValidationError);
    meta.pattern = "RGGB";
    meta.black_level = 100;
    CHECK_THROWS_AS(meta.validate(), ValidationError);  // black without white
    meta.white_level = 50;
    CHECK_THROWS_AS(meta.validate(), ValidationError);  // inverted
    meta.white_level = 4000;
    CHECK_NOTHROW(meta.validate());
}

TEST_CASE("gaussian sampler is deterministic and roughly standard") {
    GaussianSampler a(7), b(7), c(8);
    double first = a();
    CHECK(first == b());
    CHECK(first != c());

    GaussianSampler g(123);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = g();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}
