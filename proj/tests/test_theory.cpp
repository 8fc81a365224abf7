// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <bayerisp/theory.hpp>

using namespace bayerisp;
using namespace bayerisp::theory;

namespace {

DiscreteDistribution random_dist(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> uni(0.01, 1.0);
    std::vector<double> w(static_cast<size_t>(n));
    for (auto& x : w) x = uni(rng);
    return DiscreteDistribution::normalized(w);
}

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLn4 = 1.3862943611198906;

}  // namespace

TEST_CASE("distribution constructor enforces simplex membership") {
    CHECK_NOTHROW(DiscreteDistribution({0.5, 0.5}));
    CHECK_NOTHROW(DiscreteDistribution({1.0}));
    CHECK_THROWS_AS(DiscreteDistribution({0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(DiscreteDistribution({1.2, -0.2}), ValidationError);
    CHECK_THROWS_AS(DiscreteDistribution({}), ValidationError);
}

TEST_CASE("JS divergence endpoints") {
    const DiscreteDistribution p({1.0, 0.0});
    const DiscreteDistribution q({0.0, 1.0});
    CHECK(js_divergence(p, p) == 0.0);
    CHECK(js_divergence(p, q) == Catch::Approx(kLn2).margin(1e-15));
    CHECK(js_divergence(q, p) == js_divergence(p, q));
}

TEST_CASE("JS handles zero-mass bins without NaN") {
    const DiscreteDistribution p({0.7, 0.3, 0.0});
    const DiscreteDistribution q({0.0, 0.3, 0.7});
    const double v = js_divergence(p, q);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
    CHECK(v <= kLn2 + 1e-15);
}

TEST_CASE("discrete pushforward relocates mass along the permutation") {
    const DiscreteDistribution p({0.1, 0.2, 0.3, 0.4});
    const InvertibleMap t = InvertibleMap::permutation({2, 0, 3, 1});
    const DiscreteDistribution q = pushforward(p, t);
    CHECK(q[2] == 0.1);
    CHECK(q[0] == 0.2);
    CHECK(q[3] == 0.3);
    CHECK(q[1] == 0.4);
}

TEST_CASE("permutation maps must be bijections") {
    CHECK_THROWS_AS(InvertibleMap::permutation({0, 0, 1}), ValidationError);
    CHECK_THROWS_AS(InvertibleMap::permutation({0, 3}), ValidationError);
    CHECK_NOTHROW(InvertibleMap::permutation({1, 0}));
}

TEST_CASE("JS is invariant under discrete relabeling") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const int n = 2 + static_cast<int>(rng() % 63);
        const DiscreteDistribution p = random_dist(rng, n);
        const DiscreteDistribution q = random_dist(rng, n);
        std::vector<int> perm(static_cast<size_t>(n));
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        std::shuffle(perm.begin(), perm.end(), rng);
        const InvertibleMap map = InvertibleMap::permutation(perm);
        const double before = js_divergence(p, q);
        const double after = js_divergence(pushforward(p, map), pushforward(q, map));
        CHECK(std::abs(before - after) <= 1e-12);
    }
}

TEST_CASE("a two-to-one fold changes JS on an asymmetric pair") {
    const DiscreteDistribution p({0.7, 0.1, 0.1, 0.1});
    const DiscreteDistribution q({0.1, 0.1, 0.1, 0.7});
    const std::vector<int> fold{0, 0, 1, 2};
    const double before = js_divergence(p, q);
    const double after = js_divergence(fold_pushforward(p, fold, 3), fold_pushforward(q, fold, 3));
    CHECK(std::abs(before - after) > 1e-3);
}

TEST_CASE("gridded density models a uniform law and its stretch") {
    const int n = 64;
    GriddedDensity u(0.0, 1.0, std::vector<double>(n, 1.0));
    CHECK(u.cdf(0.0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(u.cdf(0.5) == Catch::Approx(0.5).margin(1e-12));
    CHECK(u.cdf(1.0) == Catch::Approx(1.0).margin(1e-12));

    // x -> 2x sends the uniform density on [0,1] to 0.5 on [0,2]
    const InvertibleMap stretch = InvertibleMap::piecewise_linear({0.0, 1.0}, {0.0, 2.0});
    const GriddedDensity pushed = pushforward(u, stretch);
    CHECK(pushed.lo() == Catch::Approx(0.0).margin(1e-12));
    CHECK(pushed.hi() == Catch::Approx(2.0).margin(1e-12));
    for (size_t i = 0; i < pushed.cells(); ++i)
        CHECK(pushed.density()[i] == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("piecewise-linear maps invert exactly on their breakpoints") {
    const InvertibleMap m = InvertibleMap::piecewise_linear({-1.0, 0.0, 2.0}, {0.0, 1.0, 1.5});
    CHECK(m(-1.0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(m(0.0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(m(2.0) == Catch::Approx(1.5).margin(1e-15));
    for (double x : {-0.9, -0.3, 0.1, 1.7}) CHECK(m.inverse(m(x)) == Catch::Approx(x).margin(1e-12));
    CHECK_THROWS_AS(InvertibleMap::piecewise_linear({0.0, 1.0}, {1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(InvertibleMap::piecewise_linear({0.0, 1.0}, {1.0, 0.5}), ValidationError);
}

TEST_CASE("JS is invariant under monotone reparameterization of densities") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> center(0.15, 0.85);
    std::uniform_real_distribution<double> amp(0.5, 2.0);
    const int n = 8192;
    for (int t = 0; t < 5; ++t) {
        // smooth profiles keep the re-gridding error quadratic in cell width
        const double cp = center(rng), cq = center(rng), ap = amp(rng), aq = amp(rng);
        std::vector<double> dp(n), dq(n);
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / n;
            dp[i] = 0.2 + ap * std::exp(-40.0 * (x - cp) * (x - cp));
            dq[i] = 0.2 + aq * std::exp(-40.0 * (x - cq) * (x - cq));
        }
        const GriddedDensity p = GriddedDensity::normalized(0.0, 1.0, dp);
        const GriddedDensity q = GriddedDensity::normalized(0.0, 1.0, dq);
        const InvertibleMap map =
            InvertibleMap::piecewise_linear({0.0, 0.4, 1.0}, {-1.0, 0.2, 0.5});
        const double before = js_divergence(p, q);
        const double after = js_divergence(pushforward(p, map), pushforward(q, map));
        CHECK(std::abs(before - after) <= 1e-6);
    }
}

TEST_CASE("optimal discriminator and the value function agree with the closed form") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(rng() % 31);
        const DiscreteDistribution p = random_dist(rng, n);
        const DiscreteDistribution q = random_dist(rng, n);
        const std::vector<double> d = optimal_discriminator(p, q);
        CHECK(std::abs(gan_value(p, q, d) - virtual_criterion(p, q)) <= 1e-9);
    }
}

TEST_CASE("the criterion attains exactly -ln4 when the distributions match") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 50; ++t) {
        const DiscreteDistribution p = random_dist(rng, 2 + static_cast<int>(rng() % 31));
        CHECK(virtual_criterion(p, p) == -std::log(4.0));
        const std::vector<double> d = optimal_discriminator(p, p);
        for (double v : d) CHECK(v == 0.5);
    }
    CHECK(-std::log(4.0) == Catch::Approx(-kLn4).margin(1e-15));
}

TEST_CASE("no discriminator beats the optimal one") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const DiscreteDistribution p = random_dist(rng, 16);
    const DiscreteDistribution q = random_dist(rng, 16);
    const double best = gan_value(p, q, optimal_discriminator(p, q));
    for (int t = 0; t < 500; ++t) {
        std::vector<double> d(16);
        for (auto& v : d) v = uni(rng);
        CHECK(gan_value(p, q, d) <= best + 1e-12);
    }
}

TEST_CASE("weight demodulation yields unit per-output-channel norm") {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> gauss(0.0, 1.0);
    WeightTensor t;
    t.in_channels = 3;
    t.out_channels = 4;
    t.kernel_h = 3;
    t.kernel_w = 3;
    t.w.resize(static_cast<size_t>(3 * 4 * 3 * 3));
    for (auto& v : t.w) v = gauss(rng);
    t.s = {0.5, 1.5, 2.0};
    t.epsilon = 0.0;

    const WeightTensor d = weight_demodulate(t);
    for (int j = 0; j < t.out_channels; ++j) {
        double norm = 0;
        for (int i = 0; i < t.in_channels; ++i)
            for (int a = 0; a < t.kernel_h; ++a)
                for (int b = 0; b < t.kernel_w; ++b) {
                    const double v = d.w[d.index(i, j, a, b)];
                    norm += v * v;
                }
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-12);
    }
}

TEST_CASE("demodulation is invariant to uniform scale of the style vector") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> gauss(0.0, 1.0);
    WeightTensor t;
    t.in_channels = 2;
    t.out_channels = 2;
    t.kernel_h = 2;
    t.kernel_w = 2;
    t.w.resize(16);
    for (auto& v : t.w) v = gauss(rng);
    t.s = {0.7, 1.9};
    t.epsilon = 0.0;

    WeightTensor scaled = t;
    for (auto& v : scaled.s) v *= 7.5;
    const WeightTensor a = weight_demodulate(t);
    const WeightTensor b = weight_demodulate(scaled);
    for (size_t i = 0; i < a.w.size(); ++i) CHECK(std::abs(a.w[i] - b.w[i]) <= 1e-12);
}

TEST_CASE("demodulation with positive epsilon shrinks the norm below one") {
    WeightTensor t;
    t.in_channels = 1;
    t.out_channels = 1;
    t.kernel_h = 1;
    t.kernel_w = 1;
    t.w = {3.0};
    t.s = {2.0};
    t.epsilon = 1e-2;
    const WeightTensor d = weight_demodulate(t);
    // 6 / sqrt(36 + 1e-2) is just under 1
    CHECK(d.w[0] < 1.0);
    CHECK(d.w[0] == Catch::Approx(6.0 / std::sqrt(36.01)).margin(1e-15));

    t.epsilon = 0.0;
    CHECK(weight_demodulate(t).w[0] == Catch::Approx(1.0).margin(1e-15));

    t.w = {0.0};
    CHECK_THROWS_AS(weight_demodulate(t), ValidationError);
}

TEST_CASE("feature matching loss on scalar features is the absolute gap") {
    FeatureTensor a;
    a.channels = a.height = a.width = 1;
    a.data = {3.0};
    FeatureTensor b = a;
    b.data = {5.0};
    CHECK(feature_matching_loss({a}, {b}) == 2.0);
    CHECK(feature_matching_loss({a, a}, {b, b}) == 4.0);  // layers accumulate
}

TEST_CASE("feature matching loss is size-normalized per layer") {
    FeatureTensor a;
    a.channels = 2;
    a.height = 2;
    a.width = 2;
    a.data.assign(8, 1.0);
    FeatureTensor b = a;
    for (auto& v : b.data) v = 2.0;
    // every element differs by 1, so the normalized L1 gap is 1 regardless
    // of the tensor size
    CHECK(feature_matching_loss({a}, {b}) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("perceptual loss weights five blocks") {
    std::vector<FeatureTensor> real(5), fake(5);
    for (int i = 0; i < 5; ++i) {
        real[i].channels = real[i].height = real[i].width = 1;
        real[i].data = {0.0};
        fake[i] = real[i];
    }
    fake[4].data = {1.0};  // only the last block differs, weight 1
    CHECK(perceptual_loss(real, fake) == Catch::Approx(1.0).margin(1e-15));
    fake[4].data = {0.0};
    fake[0].data = {1.0};  // first block carries weight 1/32
    CHECK(perceptual_loss(real, fake) == Catch::Approx(1.0 / 32).margin(1e-15));

    real.pop_back();
    fake.pop_back();
    CHECK_THROWS_AS(perceptual_loss(real, fake), ValidationError);
}

TEST_CASE("total loss composes the three terms with default weights") {
    CHECK(total_loss(1.0, 0.5, 0.25) == Catch::Approx(1.0 + 5.0 + 2.5).margin(1e-15));
    CHECK(total_loss(1.0, 0.5, 0.25, 0.0, 0.0) == 1.0);
    CHECK(total_loss(0.0, 1.0, 1.0, 2.0, 3.0) == 5.0);
}

TEST_CASE("feature tensors round-trip through the binary container") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "bayerisp_feat_test.bin";

    std::vector<FeatureTensor> layers(2);
    layers[0].channels = 2;
    layers[0].height = 1;
    layers[0].width = 3;
    layers[0].data = {1.0, -2.0, 3.5, 0.0, 1e-9, 42.0};
    layers[1].channels = 1;
    layers[1].height = 2;
    layers[1].width = 2;
    layers[1].data = {0.25, 0.5, 0.75, 1.0};

    write_feature_tensors(layers, path);
    const std::vector<FeatureTensor> back = read_feature_tensors(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].channels == 2);
    CHECK(back[0].data == layers[0].data);
    CHECK(back[1].width == 2);
    CHECK(back[1].data == layers[1].data);

    // a header announcing one layer with nothing after it must be rejected
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        const char header[4] = {1, 0, 0, 0};
        f.write(header, 4);
    }
    CHECK_THROWS_AS(read_feature_tensors(path), IoError);
    fs::remove(path);
}

TEST_CASE("numerical jacobian of a linear map recovers its matrix") {
    const auto f = [](const std::vector<double>& x) {
        return std::vector<double>{2.0 * x[0] - x[1], 0.5 * x[1]};
    };
    const auto jac = numerical_jacobian(f, {0.3, 0.7}, 1e-5);
    CHECK(jac[0][0] == Catch::Approx(2.0).margin(1e-9));
    CHECK(jac[0][1] == Catch::Approx(-1.0).margin(1e-9));
    CHECK(jac[1][0] == Catch::Approx(0.0).margin(1e-9));
    CHECK(jac[1][1] == Catch::Approx(0.5).margin(1e-9));
}
