// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// bayertool: batch frontend for dataset conversion between color images and
// RAW Bayer mosaics, metric reports, and the numeric verification battery.
//
// Subcommands.
//   to-raw    reverse a display pipeline over a directory of color images
//   develop   run the forward pipeline over a directory of raw mosaics
//   metrics   compare two directories pairwise and write a metric report
//   verify    run the deterministic invariant battery
//   mosaic    sample one color image onto a CFA mosaic
//   demosaic  interpolate one mosaic back to a color image
//   pack      rearrange a mosaic into four half-resolution channel planes
//   unpack    invert pack
//
// Exit codes: 0 success, 1 verification failure, 2 bad flags, 3 unreadable
// input, 4 pipeline or data validation failure, 5 no comparable pairs.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <bayerisp/codec.hpp>
#include <bayerisp/common.hpp>
#include <bayerisp/image.hpp>
#include <bayerisp/isp.hpp>
#include <bayerisp/metrics.hpp>
#include <bayerisp/mosaic.hpp>
#include <bayerisp/verify.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitBadFlags = 2;
constexpr int kExitUnreadable = 3;
constexpr int kExitValidation = 4;
constexpr int kExitNoPairs = 5;

/// Flag combinations CLI11 cannot express (value syntax like HxW) raise this
/// instead of ValidationError so they map to the bad-flags exit code.
struct FlagError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::mutex g_log_mutex;

void log_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::cerr << line << '\n';
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Non-recursive listing of regular files with one of the given extensions,
/// sorted by filename so every run enumerates in the same order.
std::vector<fs::path> list_files(const fs::path& dir, std::initializer_list<const char*> exts) {
    if (!fs::exists(dir) || !fs::is_directory(dir))
        throw bayerisp::IoError("not a readable directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = lower(entry.path().extension().string());
        for (const char* want : exts)
            if (ext == want) {
                out.push_back(entry.path());
                break;
            }
    }
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    return out;
}

/// Runs fn(0..count-1) on a pool of worker threads. Each index is claimed
/// exactly once; fn must confine its writes to per-index slots.
void parallel_for(size_t count, int jobs, const std::function<void(size_t)>& fn) {
    const size_t workers = std::min<size_t>(static_cast<size_t>(std::max(jobs, 1)), count);
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct FileRecord {
    std::string in;
    std::string out;
    std::string status = "ok";
    double clipped_fraction = 0.0;
};

void write_manifest(const fs::path& out_dir, const nlohmann::json& params,
                    const std::vector<FileRecord>& records) {
    nlohmann::json j;
    j["tool_version"] = bayerisp::kToolVersion;
    j["params"] = params;
    j["files"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json e;
        e["in"] = r.in;
        e["out"] = r.out;
        e["status"] = r.status;
        e["clipped_fraction"] = r.clipped_fraction;
        j["files"].push_back(std::move(e));
    }
    const fs::path path = out_dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw bayerisp::IoError("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

std::pair<int, int> parse_size(const std::string& text) {
    const size_t x = text.find('x');
    int h = 0, w = 0;
    try {
        size_t hp = 0, wp = 0;
        if (x == std::string::npos) throw std::invalid_argument(text);
        h = std::stoi(text.substr(0, x), &hp);
        w = std::stoi(text.substr(x + 1), &wp);
        if (hp != x || wp != text.size() - x - 1) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw FlagError("--size expects HxW, got '" + text + "'");
    }
    if (h < 4 || w < 4 || h % 2 != 0 || w % 2 != 0)
        throw FlagError("--size dimensions must be even and >= 4");
    return {h, w};
}

std::pair<double, double> parse_noise(const std::string& text) {
    const size_t comma = text.find(',');
    double sigma = 0, scale = 0;
    try {
        size_t sp = 0, cp = 0;
        if (comma == std::string::npos) throw std::invalid_argument(text);
        sigma = std::stod(text.substr(0, comma), &sp);
        scale = std::stod(text.substr(comma + 1), &cp);
        if (sp != comma || cp != text.size() - comma - 1) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw FlagError("--noise expects sigma,scale, got '" + text + "'");
    }
    if (sigma < 0 || scale < 0) throw FlagError("--noise parameters must be nonnegative");
    return {sigma, scale};
}

/// True when any noise stage asks for one shared stream across all files.
bool wants_global_seed(const bayerisp::isp::IspPipeline& pipe) {
    for (const auto& s : pipe.stages())
        if (const auto* n = std::get_if<bayerisp::isp::Noise>(&s))
            if (n->seed_policy == bayerisp::isp::SeedPolicy::Global) return true;
    return false;
}

// ---------------------------------------------------------------- to-raw --

struct ToRawArgs {
    std::string in_dir;
    std::string out_dir;
    std::string config;
    std::string pattern = "rggb";
    int bit_depth = 8;
    std::string size;
    std::string resize_order = "before";
    std::string resize_filter = "box";
    std::string noise;
    std::uint64_t seed = 0;
    int jobs = 1;
};

int run_to_raw(const ToRawArgs& a) {
    using namespace bayerisp;
    isp::IspPipeline pipe = isp::read_pipeline(a.config);
    const std::string obstacle = pipe.reversibility_obstacle();
    if (!obstacle.empty()) throw ValidationError("pipeline is not reversible: " + obstacle);

    if (!a.noise.empty()) {
        // Flag noise becomes a leading capture-noise stage so it lands on the
        // final digital numbers through the normal reverse path.
        const auto [sigma, scale] = parse_noise(a.noise);
        std::vector<isp::IspStage> stages;
        stages.push_back(isp::Noise{sigma, scale, isp::SeedPolicy::PerFile});
        for (const auto& s : pipe.stages()) stages.push_back(s);
        pipe = isp::IspPipeline(std::move(stages));
    }

    std::optional<std::pair<int, int>> size;
    if (!a.size.empty()) size = parse_size(a.size);
    const ResizeFilter filter = resize_filter_of(a.resize_filter);
    const CfaPattern pattern = pattern_of(a.pattern);
    const bool global_seed = wants_global_seed(pipe);

    const std::vector<fs::path> files = list_files(a.in_dir, {".png", ".ppm"});
    fs::create_directories(a.out_dir);

    std::vector<FileRecord> records(files.size());
    parallel_for(files.size(), a.jobs, [&](size_t i) {
        FileRecord& rec = records[i];
        rec.in = files[i].filename().string();
        const std::string out_name = files[i].stem().string() + ".pgm";
        try {
            ColorImage color = read_color(files[i]);
            if (size && a.resize_order == "before")
                color = resize_color(color, size->first, size->second, filter);
            isp::RunOptions opt;
            opt.seed = global_seed ? a.seed : per_file_seed(a.seed, rec.in);
            isp::ReverseResult res =
                isp::run_reverse(pipe, color, isp::ReverseTarget{a.bit_depth, pattern}, opt);
            BayerImage raw = std::move(res.image);
            if (size && a.resize_order == "after")
                raw = bayer_resize(raw, size->first, size->second, filter);
            write_bayer(raw, fs::path(a.out_dir) / out_name, "to-raw:" + rec.in);
            rec.out = out_name;
            rec.clipped_fraction = res.clipped_fraction;
        } catch (const std::exception& e) {
            rec.status = std::string("error: ") + e.what();
            log_line("to-raw: skipping " + rec.in + ": " + e.what());
        }
    });

    nlohmann::json params;
    params["command"] = "to-raw";
    params["in"] = a.in_dir;
    params["out"] = a.out_dir;
    params["config"] = a.config;
    params["pattern"] = a.pattern;
    params["bit_depth"] = a.bit_depth;
    if (!a.size.empty()) {
        params["size"] = a.size;
        params["resize_order"] = a.resize_order;
        params["resize_filter"] = a.resize_filter;
    }
    if (!a.noise.empty()) params["noise"] = a.noise;
    params["seed"] = a.seed;
    // --jobs is deliberately absent: the manifest records everything the
    // output bytes depend on, and worker count is not one of those things
    write_manifest(a.out_dir, params, records);
    return kExitOk;
}

// --------------------------------------------------------------- develop --

struct DevelopArgs {
    std::string in_dir;
    std::string out_dir;
    std::string config;
    std::string format = "png";
    std::uint64_t seed = 0;
    int jobs = 1;
};

int run_develop(const DevelopArgs& a) {
    using namespace bayerisp;
    const isp::IspPipeline pipe = isp::read_pipeline(a.config);
    if (!pipe.has_demosaic()) throw ValidationError("pipeline has no demosaic stage");
    const bool global_seed = wants_global_seed(pipe);

    const std::vector<fs::path> files = list_files(a.in_dir, {".pgm"});
    fs::create_directories(a.out_dir);

    std::vector<FileRecord> records(files.size());
    parallel_for(files.size(), a.jobs, [&](size_t i) {
        FileRecord& rec = records[i];
        rec.in = files[i].filename().string();
        const std::string out_name = files[i].stem().string() + "." + a.format;
        try {
            const BayerImage raw = read_bayer(files[i]);
            isp::RunOptions opt;
            opt.seed = global_seed ? a.seed : per_file_seed(a.seed, rec.in);
            isp::ForwardResult res = isp::run_forward(pipe, raw, opt);
            const fs::path out_path = fs::path(a.out_dir) / out_name;
            if (a.format == "ppm")
                write_ppm(res.image, out_path);
            else
                write_png(res.image, out_path, 8);
            rec.out = out_name;
            rec.clipped_fraction = res.clipped_fraction;
        } catch (const std::exception& e) {
            rec.status = std::string("error: ") + e.what();
            log_line("develop: skipping " + rec.in + ": " + e.what());
        }
    });

    nlohmann::json params;
    params["command"] = "develop";
    params["in"] = a.in_dir;
    params["out"] = a.out_dir;
    params["config"] = a.config;
    params["format"] = a.format;
    params["seed"] = a.seed;
    write_manifest(a.out_dir, params, records);
    return kExitOk;
}

// --------------------------------------------------------------- metrics --

struct MetricsArgs {
    std::string ref_dir;
    std::string test_dir;
    std::string report;
    std::vector<std::string> selection{"mse", "psnr", "mssim"};
    std::vector<std::string> frechet_stats;
    int bit_depth = 8;
};

std::map<std::string, fs::path> stem_index(const std::vector<fs::path>& files,
                                           const char* which) {
    std::map<std::string, fs::path> index;
    for (const auto& f : files) {
        const auto [it, inserted] = index.emplace(f.stem().string(), f);
        if (!inserted)
            log_line(std::string("metrics: duplicate stem in ") + which + " dir, keeping " +
                     it->second.filename().string() + ", ignoring " + f.filename().string());
    }
    return index;
}

int run_metrics(const MetricsArgs& a) {
    using namespace bayerisp;
    const auto want = [&](const char* name) {
        return std::find(a.selection.begin(), a.selection.end(), name) != a.selection.end();
    };
    const bool want_mse = want("mse");
    const bool want_psnr = want("psnr");
    const bool want_mssim = want("mssim");
    const bool want_frechet = want("frechet") || !a.frechet_stats.empty();
    if (want("frechet") && a.frechet_stats.empty())
        throw FlagError("--metrics frechet requires --frechet-stats A.bin B.bin");

    const auto ref_index =
        stem_index(list_files(a.ref_dir, {".pgm", ".png", ".ppm"}), "ref");
    const auto test_index =
        stem_index(list_files(a.test_dir, {".pgm", ".png", ".ppm"}), "test");

    std::vector<std::pair<fs::path, fs::path>> pairs;
    for (const auto& [stem, ref_path] : ref_index) {
        const auto it = test_index.find(stem);
        if (it == test_index.end()) {
            log_line("metrics: no test counterpart for " + ref_path.filename().string());
            continue;
        }
        pairs.emplace_back(ref_path, it->second);
    }
    for (const auto& [stem, test_path] : test_index)
        if (!ref_index.count(stem))
            log_line("metrics: no ref counterpart for " + test_path.filename().string());

    metrics::MetricReport report;
    std::vector<double> mses;
    std::vector<int> depths;
    std::vector<double> mssims;
    for (const auto& [ref_path, test_path] : pairs) {
        const std::string name = ref_path.stem().string();
        try {
            const bool ref_bayer = lower(ref_path.extension().string()) == ".pgm";
            const bool test_bayer = lower(test_path.extension().string()) == ".pgm";
            if (ref_bayer != test_bayer)
                throw ValidationError("one side is a mosaic, the other a color image");
            metrics::PairMetrics pm;
            pm.name = name;
            double pair_mse = 0;
            int pair_depth = a.bit_depth;
            SidecarMeta defaults;
            defaults.bit_depth = a.bit_depth;
            if (ref_bayer) {
                const BayerImage ref = read_bayer(ref_path, defaults);
                const BayerImage test = read_bayer(test_path, defaults);
                pair_mse = metrics::mse(ref, test);
                pair_depth = ref.bit_depth();
                if (want_mssim) pm.mssim = metrics::mssim(ref, test);
            } else {
                const ColorImage ref = read_color(ref_path);
                const ColorImage test = read_color(test_path);
                pair_mse = metrics::mse(ref, test, a.bit_depth);
                if (want_mssim) pm.mssim = metrics::mssim(ref, test, a.bit_depth);
            }
            if (want_mse) pm.mse = pair_mse;
            if (want_psnr) pm.psnr = metrics::psnr_from_mse(pair_mse, pair_depth);
            mses.push_back(pair_mse);
            depths.push_back(pair_depth);
            if (pm.mssim) mssims.push_back(*pm.mssim);
            report.pairs.push_back(std::move(pm));
        } catch (const std::exception& e) {
            log_line("metrics: skipping pair " + name + ": " + e.what());
        }
    }

    if (report.pairs.empty()) {
        log_line("metrics: no comparable pairs between " + a.ref_dir + " and " + a.test_dir);
        return kExitNoPairs;
    }

    if (want_psnr) {
        const bool uniform =
            std::all_of(depths.begin(), depths.end(), [&](int b) { return b == depths.front(); });
        if (uniform)
            report.ave_psnr = metrics::ave_psnr(mses, depths.front());
        else
            log_line("metrics: mixed bit depths across pairs, omitting ave_psnr");
    }
    if (want_mssim && !mssims.empty()) {
        double sum = 0;
        for (double v : mssims) sum += v;
        report.mssim_mean = sum / static_cast<double>(mssims.size());
    }
    if (want_frechet) {
        const auto fa = metrics::read_feature_vectors(a.frechet_stats[0]);
        const auto fb = metrics::read_feature_vectors(a.frechet_stats[1]);
        report.frechet =
            metrics::frechet_distance(metrics::gaussian_stats(fa), metrics::gaussian_stats(fb));
    }

    const fs::path report_path(a.report);
    if (!report_path.parent_path().empty()) fs::create_directories(report_path.parent_path());
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw IoError("cannot write report " + report_path.string());
    out << report.to_json().dump(2) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- verify --

int run_verify(const std::string& report_path) {
    const bayerisp::verify::VerifySuite suite = bayerisp::verify::run_theory_suite();
    for (const auto& c : suite.checks) {
        std::cout << (c.pass ? "PASS" : "FAIL") << ' ' << c.name << " value=" << c.value
                  << " tol=" << c.tolerance << (c.expected_violation ? " (negative control)" : "")
                  << '\n';
    }
    std::cout << (suite.pass() ? "suite: PASS" : "suite: FAIL") << " (" << suite.checks.size()
              << " checks)\n";
    if (!report_path.empty()) {
        const fs::path path(report_path);
        if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw bayerisp::IoError("cannot write report " + report_path);
        out << suite.to_json().dump(2) << '\n';
    }
    return suite.pass() ? kExitOk : kExitVerifyFail;
}

// ------------------------------------------------------- single-file ops --

struct SingleFileArgs {
    std::string in;
    std::string out;
    std::string alg = "bilinear";
    std::string pattern = "rggb";
    int bit_depth = 8;
};

int run_mosaic(const SingleFileArgs& a) {
    using namespace bayerisp;
    const ColorImage color = read_color(a.in);
    const BayerImage raw = mosaic(color, pattern_of(a.pattern), a.bit_depth);
    write_bayer(raw, a.out, "mosaic:" + fs::path(a.in).filename().string());
    return kExitOk;
}

int run_demosaic(const SingleFileArgs& a) {
    using namespace bayerisp;
    SidecarMeta defaults;
    defaults.pattern = a.pattern;
    defaults.bit_depth = a.bit_depth;
    const BayerImage raw = read_bayer(a.in, defaults);
    const ColorImage color = demosaic(raw, demosaic_alg_of(a.alg));
    const std::string ext = lower(fs::path(a.out).extension().string());
    if (ext == ".ppm")
        write_ppm(color, a.out);
    else if (ext == ".png")
        // 16-bit output keeps every captured sample recoverable by mosaic
        write_png(color, a.out, 16);
    else
        throw FlagError("demosaic output must be .ppm or .png, got '" + a.out + "'");
    return kExitOk;
}

int run_pack(const SingleFileArgs& a) {
    using namespace bayerisp;
    SidecarMeta defaults;
    defaults.pattern = a.pattern;
    defaults.bit_depth = a.bit_depth;
    const BayerImage raw = read_bayer(a.in, defaults);
    write_packed(pack(raw), a.out);
    return kExitOk;
}

int run_unpack(const SingleFileArgs& a, bool pattern_given) {
    using namespace bayerisp;
    const PackedBayer packed = read_packed(a.in);
    const BayerImage raw =
        pattern_given ? unpack(packed, pattern_of(a.pattern)) : unpack(packed);
    write_bayer(raw, a.out, "unpack:" + fs::path(a.in).filename().string());
    return kExitOk;
}

int guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const FlagError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadFlags;
    } catch (const bayerisp::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const bayerisp::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUnreadable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUnreadable;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RAW-Bayer dataset conversion, metrics, and verification"};
    app.require_subcommand(1);

    const std::vector<std::string> kPatterns{"rggb", "bggr", "grbg", "gbrg"};

    ToRawArgs to_raw_args;
    CLI::App* to_raw = app.add_subcommand(
        "to-raw", "Convert color images to RAW mosaics by reversing a display pipeline");
    to_raw->add_option("--in", to_raw_args.in_dir, "Input directory of .png/.ppm images")
        ->required();
    to_raw->add_option("--out", to_raw_args.out_dir, "Output directory")->required();
    to_raw->add_option("--config", to_raw_args.config, "Pipeline config JSON")->required();
    to_raw->add_option("--pattern", to_raw_args.pattern, "CFA pattern of the outputs")
        ->check(CLI::IsMember(kPatterns));
    to_raw->add_option("--bit-depth", to_raw_args.bit_depth, "Output bit depth")
        ->check(CLI::Range(8, 16))
        ->required();
    CLI::Option* size_opt =
        to_raw->add_option("--size", to_raw_args.size, "Resize target as HxW");
    to_raw->add_option("--resize-order", to_raw_args.resize_order,
                       "Resize the color input (before) or the mosaic output (after)")
        ->check(CLI::IsMember({"before", "after"}))
        ->needs(size_opt);
    to_raw->add_option("--resize-filter", to_raw_args.resize_filter, "Resampling filter")
        ->check(CLI::IsMember({"box", "bilinear"}))
        ->needs(size_opt);
    to_raw->add_option("--noise", to_raw_args.noise, "Capture noise as sigma,scale");
    to_raw->add_option("--seed", to_raw_args.seed, "Global noise seed");
    to_raw->add_option("--jobs", to_raw_args.jobs, "Worker threads")->check(CLI::Range(1, 256));

    DevelopArgs develop_args;
    CLI::App* develop =
        app.add_subcommand("develop", "Run the forward pipeline over RAW mosaics");
    develop->add_option("--in", develop_args.in_dir, "Input directory of .pgm mosaics")
        ->required();
    develop->add_option("--out", develop_args.out_dir, "Output directory")->required();
    develop->add_option("--config", develop_args.config, "Pipeline config JSON")->required();
    develop->add_option("--format", develop_args.format, "Output image format")
        ->check(CLI::IsMember({"ppm", "png"}));
    develop->add_option("--seed", develop_args.seed, "Global noise seed");
    develop->add_option("--jobs", develop_args.jobs, "Worker threads")->check(CLI::Range(1, 256));

    MetricsArgs metrics_args;
    CLI::App* metrics_cmd =
        app.add_subcommand("metrics", "Compare two directories pairwise by filename stem");
    metrics_cmd->add_option("--ref", metrics_args.ref_dir, "Reference directory")->required();
    metrics_cmd->add_option("--test", metrics_args.test_dir, "Test directory")->required();
    metrics_cmd->add_option("--report", metrics_args.report, "Report JSON path")->required();
    metrics_cmd
        ->add_option("--metrics", metrics_args.selection, "Comma-separated metric selection")
        ->delimiter(',')
        ->check(CLI::IsMember({"mse", "psnr", "mssim", "frechet"}));
    metrics_cmd
        ->add_option("--frechet-stats", metrics_args.frechet_stats,
                     "Two feature-vector files for the Frechet distance")
        ->expected(2);
    metrics_cmd->add_option("--bit-depth", metrics_args.bit_depth, "Bit depth for color pairs")
        ->check(CLI::Range(8, 16));

    std::string verify_suite = "theory";
    std::string verify_report;
    CLI::App* verify_cmd = app.add_subcommand("verify", "Run the numeric invariant battery");
    verify_cmd->add_option("--suite", verify_suite, "Battery to run")
        ->check(CLI::IsMember({"theory"}));
    verify_cmd->add_option("--report", verify_report, "Report JSON path");

    SingleFileArgs mosaic_args;
    CLI::App* mosaic_cmd = app.add_subcommand("mosaic", "Sample one color image onto a mosaic");
    mosaic_cmd->add_option("--in", mosaic_args.in, "Input color image")->required();
    mosaic_cmd->add_option("--out", mosaic_args.out, "Output .pgm mosaic")->required();
    mosaic_cmd->add_option("--pattern", mosaic_args.pattern, "CFA pattern")
        ->check(CLI::IsMember(kPatterns));
    mosaic_cmd->add_option("--bit-depth", mosaic_args.bit_depth, "Output bit depth")
        ->check(CLI::Range(8, 16));

    SingleFileArgs demosaic_args;
    CLI::App* demosaic_cmd =
        app.add_subcommand("demosaic", "Interpolate one mosaic to a color image");
    demosaic_cmd->add_option("--in", demosaic_args.in, "Input .pgm mosaic")->required();
    demosaic_cmd->add_option("--out", demosaic_args.out, "Output .ppm or .png image")
        ->required();
    demosaic_cmd->add_option("--alg", demosaic_args.alg, "Interpolation algorithm")
        ->check(CLI::IsMember({"nearest", "bilinear", "hybrid"}));
    demosaic_cmd
        ->add_option("--pattern", demosaic_args.pattern, "CFA pattern when no sidecar exists")
        ->check(CLI::IsMember(kPatterns));
    demosaic_cmd
        ->add_option("--bit-depth", demosaic_args.bit_depth, "Bit depth when no sidecar exists")
        ->check(CLI::Range(8, 16));

    SingleFileArgs pack_args;
    CLI::App* pack_cmd =
        app.add_subcommand("pack", "Rearrange a mosaic into four channel planes");
    pack_cmd->add_option("--in", pack_args.in, "Input .pgm mosaic")->required();
    pack_cmd->add_option("--out", pack_args.out, "Output packed .pgm")->required();
    pack_cmd->add_option("--pattern", pack_args.pattern, "CFA pattern when no sidecar exists")
        ->check(CLI::IsMember(kPatterns));
    pack_cmd->add_option("--bit-depth", pack_args.bit_depth, "Bit depth when no sidecar exists")
        ->check(CLI::Range(8, 16));

    SingleFileArgs unpack_args;
    CLI::App* unpack_cmd = app.add_subcommand("unpack", "Invert pack");
    unpack_cmd->add_option("--in", unpack_args.in, "Input packed .pgm")->required();
    unpack_cmd->add_option("--out", unpack_args.out, "Output .pgm mosaic")->required();
    CLI::Option* unpack_pattern =
        unpack_cmd->add_option("--pattern", unpack_args.pattern, "Override the stored pattern")
            ->check(CLI::IsMember(kPatterns));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadFlags;
    }

    if (to_raw->parsed()) return guarded([&] { return run_to_raw(to_raw_args); });
    if (develop->parsed()) return guarded([&] { return run_develop(develop_args); });
    if (metrics_cmd->parsed()) return guarded([&] { return run_metrics(metrics_args); });
    if (verify_cmd->parsed()) return guarded([&] { return run_verify(verify_report); });
    if (mosaic_cmd->parsed()) return guarded([&] { return run_mosaic(mosaic_args); });
    if (demosaic_cmd->parsed()) return guarded([&] { return run_demosaic(demosaic_args); });
    if (pack_cmd->parsed()) return guarded([&] { return run_pack(pack_args); });
    if (unpack_cmd->parsed())
        return guarded([&] { return run_unpack(unpack_args, unpack_pattern->count() > 0); });
    return kExitBadFlags;
}
