// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: flag handling, exit codes,
// manifests, and file round trips. Every test shells out to the real binary.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include <bayerisp/codec.hpp>
#include <bayerisp/isp.hpp>
#include <bayerisp/metrics.hpp>
#include <bayerisp/mosaic.hpp>

namespace fs = std::filesystem;
using namespace bayerisp;

namespace {

int run_tool(const std::string& args) {
    const std::string cmd = std::string(BAYERTOOL_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

/// Fresh per-test sandbox under the system temp dir.
struct Sandbox {
    fs::path root;
    Sandbox() {
        root = fs::temp_directory_path() /
               ("bayerisp_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(root);
    }
    ~Sandbox() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    fs::path operator/(const char* name) const { return root / name; }
};

void write_standard_config(const fs::path& path) {
    std::ofstream(path) << R"({"stages":[
        {"type":"linearize","black":64,"white":4095},
        {"type":"demosaic","alg":"bilinear"},
        {"type":"white_balance","mode":"gray_world"},
        {"type":"gamma","a":0.4545}]})";
}

/// Like the standard config but with fixed gains, which the reverse
/// direction divides out exactly. Gray-world gains are estimated from the
/// developed image and are not recoverable from the color file alone.
void write_fixed_config(const fs::path& path) {
    std::ofstream(path) << R"({"stages":[
        {"type":"linearize","black":64,"white":4095},
        {"type":"demosaic","alg":"bilinear"},
        {"type":"white_balance","mode":"fixed","gains":[1.1,1.0,1.2]},
        {"type":"gamma","a":0.4545}]})";
}

BayerImage synthetic_raw(std::uint64_t seed, int h, int w) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 6.28);
    const double fy = uni(rng), fx = uni(rng), ph = uni(rng);
    std::vector<std::uint16_t> samples(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = 0.45 + 0.35 * std::sin(fy * y / h + fx * x / w + ph);
            samples[static_cast<size_t>(y) * w + x] =
                static_cast<std::uint16_t>(64 + round_half_away(v * (4095 - 64)));
        }
    return BayerImage(h, w, 12, std::move(samples), pattern_of("RGGB"), 64, 4095);
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    REQUIRE(fa.good());
    REQUIRE(fb.good());
    const std::string da((std::istreambuf_iterator<char>(fa)), {});
    const std::string db((std::istreambuf_iterator<char>(fb)), {});
    return da == db;
}

}  // namespace

TEST_CASE("verify subcommand exits zero and writes a report") {
    Sandbox box;
    const fs::path report = box / "verify.json";
    CHECK(run_tool("verify --suite theory --report " + report.string()) == 0);
    nlohmann::json j;
    std::ifstream(report) >> j;
    CHECK(j["suite"] == "theory");
    CHECK(j["pass"] == true);
    CHECK(j["checks"].size() >= 10);
}

TEST_CASE("unknown flags and values exit with code 2") {
    CHECK(run_tool("verify --suite unknown") == 2);
    CHECK(run_tool("frobnicate") == 2);
    CHECK(run_tool("demosaic --in x.pgm --out y.png --alg cubic") == 2);
    CHECK(run_tool("to-raw --in a --out b --config c.json --pattern xtrans --bit-depth 8") == 2);
    CHECK(run_tool("to-raw --in a --out b --config c.json --pattern rggb --bit-depth 40") == 2);
}

TEST_CASE("missing inputs exit with code 3") {
    Sandbox box;
    write_standard_config(box / "pipe.json");
    CHECK(run_tool("to-raw --in " + (box / "nodir").string() + " --out " +
                   (box / "out").string() + " --config " + (box / "pipe.json").string() +
                   " --pattern rggb --bit-depth 12") == 3);
    CHECK(run_tool("demosaic --in " + (box / "missing.pgm").string() + " --out " +
                   (box / "y.png").string()) == 3);
}

TEST_CASE("a config without demosaic fails pipeline validation with code 4") {
    Sandbox box;
    std::ofstream(box / "nodem.json")
        << R"({"stages":[{"type":"linearize","black":0,"white":255}]})";
    fs::create_directories(box / "in");
    CHECK(run_tool("develop --in " + (box / "in").string() + " --out " +
                   (box / "out").string() + " --config " + (box / "nodem.json").string()) == 4);
}

TEST_CASE("an empty input directory yields an empty manifest and success") {
    Sandbox box;
    write_standard_config(box / "pipe.json");
    fs::create_directories(box / "empty");
    CHECK(run_tool("to-raw --in " + (box / "empty").string() + " --out " +
                   (box / "out").string() + " --config " + (box / "pipe.json").string() +
                   " --pattern rggb --bit-depth 12") == 0);
    nlohmann::json manifest;
    std::ifstream(box / "out" / "manifest.json") >> manifest;
    CHECK(manifest["files"].empty());
    CHECK(manifest["params"]["command"] == "to-raw");
    CHECK(manifest["tool_version"].is_string());
}

TEST_CASE("develop then to-raw round-trips a developed image closely") {
    Sandbox box;
    write_fixed_config(box / "pipe.json");

    // seed raws, develop them to colors, convert the colors back to raws
    fs::create_directories(box / "raws");
    for (int i = 0; i < 3; ++i)
        write_bayer(synthetic_raw(100 + static_cast<std::uint64_t>(i), 24, 32),
                    box / "raws" / ("shot" + std::to_string(i) + ".pgm"));

    REQUIRE(run_tool("develop --in " + (box / "raws").string() + " --out " +
                     (box / "colors").string() + " --config " + (box / "pipe.json").string() +
                     " --format png") == 0);
    REQUIRE(run_tool("to-raw --in " + (box / "colors").string() + " --out " +
                     (box / "back").string() + " --config " + (box / "pipe.json").string() +
                     " --pattern rggb --bit-depth 12") == 0);

    for (int i = 0; i < 3; ++i) {
        const std::string name = "shot" + std::to_string(i) + ".pgm";
        const BayerImage original = read_bayer(box / "raws" / name);
        const BayerImage back = read_bayer(box / "back" / name);
        REQUIRE(back.height() == original.height());
        size_t close = 0;
        for (size_t k = 0; k < original.samples().size(); ++k) {
            const int d = std::abs(static_cast<int>(original.samples()[k]) -
                                   static_cast<int>(back.samples()[k]));
            // the only loss is 8-bit color quantization: half a display step
            // through the gamma expansion slope of 2.2 spans at most
            // 0.5/255 * 2.2 * 4031, about 18 twelve-bit steps
            if (d <= 20) ++close;
        }
        INFO(name);
        CHECK(close == original.samples().size());
    }

    nlohmann::json manifest;
    std::ifstream(box / "back" / "manifest.json") >> manifest;
    REQUIRE(manifest["files"].size() == 3);
    for (const auto& f : manifest["files"]) CHECK(f["status"] == "ok");
}

TEST_CASE("develop keeps a constant gray raw constant under gray-world") {
    Sandbox box;
    write_standard_config(box / "pipe.json");
    fs::create_directories(box / "raws");
    const BayerImage flat(16, 16, 12, std::vector<std::uint16_t>(256, 2000),
                          pattern_of("RGGB"), 64, 4095);
    write_bayer(flat, box / "raws" / "flat.pgm");
    REQUIRE(run_tool("develop --in " + (box / "raws").string() + " --out " +
                     (box / "out").string() + " --config " + (box / "pipe.json").string() +
                     " --format ppm") == 0);
    const ColorImage out = read_color(box / "out" / "flat.ppm");
    const double first = out.planes()[0][0];
    for (int k = 0; k < 3; ++k)
        for (double v : out.planes()[k]) CHECK(v == first);
}

TEST_CASE("mosaic inverts demosaic at the file level, byte for byte") {
    Sandbox box;
    write_bayer(synthetic_raw(7, 16, 20), box / "in.pgm");
    REQUIRE(run_tool("demosaic --in " + (box / "in.pgm").string() + " --out " +
                     (box / "full.png").string() + " --alg hybrid") == 0);
    REQUIRE(run_tool("mosaic --in " + (box / "full.png").string() + " --out " +
                     (box / "back.pgm").string() + " --pattern rggb --bit-depth 12") == 0);
    CHECK(same_bytes(box / "in.pgm", box / "back.pgm"));
}

TEST_CASE("pack and unpack invert each other at the file level") {
    Sandbox box;
    write_bayer(synthetic_raw(8, 12, 12), box / "in.pgm");
    REQUIRE(run_tool("pack --in " + (box / "in.pgm").string() + " --out " +
                     (box / "packed.pgm").string()) == 0);
    REQUIRE(run_tool("unpack --in " + (box / "packed.pgm").string() + " --out " +
                     (box / "back.pgm").string()) == 0);
    CHECK(same_bytes(box / "in.pgm", box / "back.pgm"));

    // the packed container carries its own pattern in the sidecar
    const SidecarMeta meta = read_sidecar(sidecar_path(box / "packed.pgm"));
    CHECK(meta.packed);
    CHECK(meta.pattern == "RGGB");
}

TEST_CASE("metrics pairs by stem, skips strays, and honors the selection") {
    Sandbox box;
    fs::create_directories(box / "ref");
    fs::create_directories(box / "test");
    write_bayer(synthetic_raw(1, 16, 16), box / "ref" / "a.pgm");
    write_bayer(synthetic_raw(1, 16, 16), box / "test" / "a.pgm");
    write_bayer(synthetic_raw(2, 16, 16), box / "ref" / "only_ref.pgm");
    write_bayer(synthetic_raw(3, 16, 16), box / "test" / "only_test.pgm");

    const fs::path report = box / "report.json";
    REQUIRE(run_tool("metrics --ref " + (box / "ref").string() + " --test " +
                     (box / "test").string() + " --report " + report.string() +
                     " --metrics mse,psnr") == 0);
    nlohmann::json j;
    std::ifstream(report) >> j;
    REQUIRE(j["pairs"].size() == 1);
    CHECK(j["pairs"][0]["name"] == "a");
    CHECK(j["pairs"][0]["mse"] == 0.0);
    CHECK(j["pairs"][0]["psnr"] == "inf");
    CHECK(j["ave_psnr"] == "inf");
    CHECK_FALSE(j["pairs"][0].contains("mssim"));
    CHECK_FALSE(j.contains("mssim_mean"));
}

TEST_CASE("metrics with disjoint stems exits with code 5") {
    Sandbox box;
    fs::create_directories(box / "ref");
    fs::create_directories(box / "test");
    write_bayer(synthetic_raw(1, 8, 8), box / "ref" / "x.pgm");
    write_bayer(synthetic_raw(1, 8, 8), box / "test" / "y.pgm");
    CHECK(run_tool("metrics --ref " + (box / "ref").string() + " --test " +
                   (box / "test").string() + " --report " + (box / "r.json").string()) == 5);
}

TEST_CASE("metrics computes the Frechet distance from feature files") {
    Sandbox box;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> cloud;
    for (int i = 0; i < 32; ++i) cloud.push_back({gauss(rng), gauss(rng)});
    metrics::write_feature_vectors(cloud, box / "a.bin");
    metrics::write_feature_vectors(cloud, box / "b.bin");

    fs::create_directories(box / "ref");
    fs::create_directories(box / "test");
    write_bayer(synthetic_raw(4, 16, 16), box / "ref" / "a.pgm");
    write_bayer(synthetic_raw(4, 16, 16), box / "test" / "a.pgm");

    const fs::path report = box / "report.json";
    REQUIRE(run_tool("metrics --ref " + (box / "ref").string() + " --test " +
                     (box / "test").string() + " --report " + report.string() +
                     " --frechet-stats " + (box / "a.bin").string() + " " +
                     (box / "b.bin").string()) == 0);
    nlohmann::json j;
    std::ifstream(report) >> j;
    REQUIRE(j.contains("frechet"));
    CHECK(std::abs(j["frechet"].get<double>()) <= 1e-9);
}

TEST_CASE("to-raw with a size flag resizes in the requested domain") {
    Sandbox box;
    write_standard_config(box / "pipe.json");
    fs::create_directories(box / "raws");
    write_bayer(synthetic_raw(31, 32, 32), box / "raws" / "shot.pgm");
    REQUIRE(run_tool("develop --in " + (box / "raws").string() + " --out " +
                     (box / "colors").string() + " --config " + (box / "pipe.json").string()) ==
            0);

    for (const char* order : {"before", "after"}) {
        const fs::path out = box.root / (std::string("resized_") + order);
        REQUIRE(run_tool("to-raw --in " + (box / "colors").string() + " --out " + out.string() +
                         " --config " + (box / "pipe.json").string() +
                         " --pattern rggb --bit-depth 12 --size 16x16 --resize-order " +
                         order) == 0);
        const BayerImage raw = read_bayer(out / "shot.pgm");
        INFO(order);
        CHECK(raw.height() == 16);
        CHECK(raw.width() == 16);
    }
}
