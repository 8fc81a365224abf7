// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include <bayerisp/image.hpp>
#include <bayerisp/metrics.hpp>

using namespace bayerisp;

namespace {

BayerImage flat_bayer(int h, int w, int bit_depth, std::uint16_t value) {
    return BayerImage(h, w, bit_depth, std::vector<std::uint16_t>(static_cast<size_t>(h) * w, value),
                      pattern_of("RGGB"));
}

ColorImage noisy_copy(const ColorImage& src, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    auto planes = src.planes();
    for (auto& p : planes)
        for (auto& v : p) v = clamp01(v + gauss(rng));
    return ColorImage(src.height(), src.width(), std::move(planes), src.color_state());
}

ColorImage smooth_scene(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 6.28);
    const double fy = uni(rng), fx = uni(rng), ph = uni(rng);
    std::array<std::vector<double>, 3> planes;
    for (int k = 0; k < 3; ++k) {
        planes[k].resize(static_cast<size_t>(h) * w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                planes[k][static_cast<size_t>(y) * w + x] =
                    0.5 + 0.3 * std::sin(fy * y / h + fx * x / w + ph + k);
    }
    return ColorImage(h, w, std::move(planes), ColorState::DisplayReferred);
}

}  // namespace

TEST_CASE("per-sample MSE on mosaics counts integer differences") {
    const BayerImage a = flat_bayer(4, 4, 8, 100);
    const BayerImage b = flat_bayer(4, 4, 8, 101);
    CHECK(metrics::mse(a, a) == 0.0);
    CHECK(metrics::mse(a, b) == 1.0);

    const BayerImage c = flat_bayer(4, 4, 8, 104);
    CHECK(metrics::mse(a, c) == 16.0);

    CHECK_THROWS_AS(metrics::mse(a, flat_bayer(4, 6, 8, 100)), ValidationError);
    CHECK_THROWS_AS(metrics::mse(a, flat_bayer(4, 4, 12, 100)), ValidationError);
}

TEST_CASE("PSNR oracles at 8 and 12 bits") {
    CHECK(metrics::psnr_from_mse(1.0, 8) == Catch::Approx(48.1308036086791).margin(1e-9));
    CHECK(metrics::psnr_from_mse(1.0, 12) == Catch::Approx(72.24507812192874).margin(1e-9));
    CHECK(std::isinf(metrics::psnr_from_mse(0.0, 8)));
    CHECK(metrics::psnr_from_mse(0.0, 8) > 0);
}

TEST_CASE("dataset PSNR pools the MSE before the logarithm") {
    CHECK(metrics::ave_psnr({1.0, 3.0}, 8) == Catch::Approx(45.12050365203929).margin(1e-9));
    // pooling differs from averaging the per-pair PSNRs (Jensen gap)
    const double pooled = metrics::ave_psnr({1.0, 100.0}, 8);
    const double averaged =
        0.5 * (metrics::psnr_from_mse(1.0, 8) + metrics::psnr_from_mse(100.0, 8));
    CHECK(pooled < averaged - 1.0);
    CHECK_THROWS_AS(metrics::ave_psnr({}, 8), ValidationError);
    CHECK_THROWS_AS(metrics::ave_psnr({-1.0}, 8), ValidationError);
}

TEST_CASE("color MSE averages the three quantized planes") {
    const ColorImage a = ColorImage::constant(4, 4, 0.5, 0.5, 0.5, ColorState::DisplayReferred);
    // one plane off by one 8-bit step, two identical
    const double step = 1.0 / 255.0;
    const ColorImage b =
        ColorImage::constant(4, 4, 0.5 + step, 0.5, 0.5, ColorState::DisplayReferred);
    CHECK(metrics::mse(a, b, 8) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("self-MSSIM is exactly one") {
    const ColorImage scene = smooth_scene(24, 32, 5);
    CHECK(metrics::mssim(scene, scene, 8) == 1.0);

    std::mt19937_64 rng(6);
    std::vector<std::uint16_t> s(16 * 16);
    for (auto& v : s) v = static_cast<std::uint16_t>(rng() % 1024);
    const BayerImage raw(16, 16, 10, s, pattern_of("GRBG"));
    CHECK(metrics::mssim(raw, raw) == 1.0);
}

TEST_CASE("MSSIM decreases monotonically with noise level") {
    const ColorImage scene = smooth_scene(32, 32, 7);
    double prev = 1.0;
    for (double sigma : {0.01, 0.02, 0.04, 0.08}) {
        const double v = metrics::mssim(scene, noisy_copy(scene, sigma, 99), 8);
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
}

TEST_CASE("a constant luminance shift lowers MSSIM only slightly") {
    const ColorImage scene = smooth_scene(24, 24, 11);
    auto planes = scene.planes();
    for (auto& p : planes)
        for (auto& v : p) v = clamp01(v + 0.02);
    const ColorImage shifted(24, 24, std::move(planes), scene.color_state());
    const double v = metrics::mssim(scene, shifted, 8);
    CHECK(v < 1.0);
    CHECK(v > 0.9);
}

TEST_CASE("MSSIM needs at least one full window") {
    const ColorImage tiny = ColorImage::constant(8, 8, 0.5, 0.5, 0.5, ColorState::DisplayReferred);
    CHECK_THROWS_AS(metrics::mssim(tiny, tiny, 8), ValidationError);
}

TEST_CASE("gaussian statistics of a two-point cloud") {
    const metrics::GaussianStats st = metrics::gaussian_stats({{0.0, 0.0}, {2.0, 2.0}});
    CHECK(st.dim == 2);
    CHECK(st.mean(0) == 1.0);
    CHECK(st.mean(1) == 1.0);
    // unbiased estimate: each covariance entry is 2
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(st.cov(r, c) == Catch::Approx(2.0).margin(1e-12));

    CHECK_THROWS_AS(metrics::gaussian_stats({{1.0, 2.0}}), ValidationError);
    CHECK_THROWS_AS(metrics::gaussian_stats({{1.0}, {1.0, 2.0}}), ValidationError);
}

TEST_CASE("one-dimensional Frechet closed forms") {
    metrics::GaussianStats a, b;
    a.dim = b.dim = 1;
    a.mean.resize(1);
    b.mean.resize(1);
    a.cov.resize(1, 1);
    b.cov.resize(1, 1);

    // equal variance, mean gap 3: distance is 9
    a.mean(0) = 0.0;
    b.mean(0) = 3.0;
    a.cov(0, 0) = b.cov(0, 0) = 2.0;
    CHECK(metrics::frechet_distance(a, b) == Catch::Approx(9.0).margin(1e-9));

    // equal mean, std 1 vs 2: distance is (1-2)^2 = 1
    b.mean(0) = 0.0;
    a.cov(0, 0) = 1.0;
    b.cov(0, 0) = 4.0;
    CHECK(metrics::frechet_distance(a, b) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("Frechet distance is symmetric and zero on identical clouds") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> fa, fb;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> va(3), vb(3);
        for (int k = 0; k < 3; ++k) {
            va[k] = gauss(rng);
            vb[k] = 0.5 * gauss(rng) + 1.0;
        }
        fa.push_back(va);
        fb.push_back(vb);
    }
    const auto sa = metrics::gaussian_stats(fa);
    const auto sb = metrics::gaussian_stats(fb);
    CHECK(metrics::frechet_distance(sa, sb) ==
          Catch::Approx(metrics::frechet_distance(sb, sa)).margin(1e-9));
    CHECK(metrics::frechet_distance(sa, sa) == Catch::Approx(0.0).margin(1e-9));
    CHECK(metrics::frechet_distance(sa, sb) > 0.1);
}

TEST_CASE("feature vectors round-trip through the binary file") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "bayerisp_vecs_test.bin";
    const std::vector<std::vector<double>> vecs{{1.0, 2.0}, {-0.5, 1e12}, {0.0, 0.25}};
    metrics::write_feature_vectors(vecs, path);
    CHECK(metrics::read_feature_vectors(path) == vecs);
    fs::remove(path);
    CHECK_THROWS_AS(metrics::read_feature_vectors(path), IoError);
}

TEST_CASE("metric report JSON uses a string sentinel for infinities") {
    metrics::MetricReport report;
    metrics::PairMetrics pm;
    pm.name = "x";
    pm.mse = 0.0;
    pm.psnr = std::numeric_limits<double>::infinity();
    pm.mssim = 1.0;
    report.pairs.push_back(pm);
    report.ave_psnr = std::numeric_limits<double>::infinity();
    report.mssim_mean = 1.0;

    const nlohmann::json j = report.to_json();
    CHECK(j["pairs"][0]["psnr"] == "inf");
    CHECK(j["ave_psnr"] == "inf");
    CHECK(j["pairs"][0]["mse"] == 0.0);
    CHECK(j.contains("frechet") == false);
}
