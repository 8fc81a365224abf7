// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// Full-reference quality metrics on quantized images (MSE, PSNR, dataset
// PSNR from pooled MSE, mean SSIM) and the Frechet distance between
// Gaussian feature statistics.
//
// All pixel metrics operate in integer digital numbers at a stated bit
// depth, so PSNR peaks at (2^b - 1)^2 and the SSIM constants scale with the
// same dynamic range.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include "bayerisp/common.hpp"
#include "bayerisp/image.hpp"

namespace bayerisp::metrics {

inline double mse(const BayerImage& a, const BayerImage& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw ValidationError("image dimension mismatch");
    if (a.bit_depth() != b.bit_depth())
        throw ValidationError("bit depth mismatch: samples are not comparable");
    double acc = 0;
    for (size_t i = 0; i < a.samples().size(); ++i) {
        const double d = static_cast<double>(a.samples()[i]) - b.samples()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.samples().size());
}

/// Color MSE on b-bit quantized plane values, averaged over the three
/// planes.
inline double mse(const ColorImage& a, const ColorImage& b, int bit_depth) {
    if (a.height() != b.height() || a.width() != b.width())
        throw ValidationError("image dimension mismatch");
    double acc = 0;
    for (int k = 0; k < 3; ++k)
        for (size_t i = 0; i < a.planes()[k].size(); ++i) {
            const double d = static_cast<double>(quantize(a.planes()[k][i], bit_depth)) -
                             quantize(b.planes()[k][i], bit_depth);
            acc += d * d;
        }
    return acc / (3.0 * static_cast<double>(a.planes()[0].size()));
}

/// 10 log10(peak^2 / MSE) with peak = 2^b - 1. Zero MSE maps to the +inf
/// sentinel rather than an arbitrary cap.
inline double psnr_from_mse(double mse_value, int bit_depth) {
    if (mse_value < 0) throw ValidationError("negative MSE");
    if (mse_value == 0) return std::numeric_limits<double>::infinity();
    const double peak = static_cast<double>(max_sample(bit_depth));
    return 10.0 * std::log10(peak * peak / mse_value);
}

inline double psnr(const BayerImage& a, const BayerImage& b) {
    return psnr_from_mse(mse(a, b), a.bit_depth());
}

inline double psnr(const ColorImage& a, const ColorImage& b, int bit_depth) {
    return psnr_from_mse(mse(a, b, bit_depth), bit_depth);
}

/// Dataset PSNR pooled from per-pair MSEs: the mean MSE goes through the
/// PSNR formula once. Not the mean of per-pair PSNRs.
inline double ave_psnr(const std::vector<double>& mses, int bit_depth) {
    if (mses.empty()) throw ValidationError("empty MSE list");
    double sum = 0;
    for (double m : mses) {
        if (m < 0) throw ValidationError("negative MSE");
        sum += m;
    }
    return psnr_from_mse(sum / static_cast<double>(mses.size()), bit_depth);
}

namespace detail {

inline std::vector<double> gaussian_window(int radius, double sigma) {
    const int size = 2 * radius + 1;
    std::vector<double> w(static_cast<size_t>(size) * size);
    double sum = 0;
    for (int y = -radius; y <= radius; ++y)
        for (int x = -radius; x <= radius; ++x) {
            const double v = std::exp(-(y * y + x * x) / (2.0 * sigma * sigma));
            w[static_cast<size_t>(y + radius) * size + (x + radius)] = v;
            sum += v;
        }
    for (double& v : w) v /= sum;
    return w;
}

/// Luma in digital numbers: Bayer samples directly, color as the plain
/// average of the three quantized planes.
inline std::vector<double> luma_dn(const BayerImage& img) {
    std::vector<double> out(img.samples().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = img.samples()[i];
    return out;
}

inline std::vector<double> luma_dn(const ColorImage& img, int bit_depth) {
    std::vector<double> out(static_cast<size_t>(img.height()) * img.width());
    for (size_t i = 0; i < out.size(); ++i) {
        const double r = quantize(img.planes()[0][i], bit_depth);
        const double g = quantize(img.planes()[1][i], bit_depth);
        const double b = quantize(img.planes()[2][i], bit_depth);
        out[i] = (r + g + b) / 3.0;
    }
    return out;
}

inline double mssim_planes(const std::vector<double>& x, const std::vector<double>& y, int h,
                           int w, int bit_depth) {
    constexpr int kRadius = 5;  // 11x11 window
    constexpr double kSigma = 1.5;
    constexpr double kK1 = 0.01;
    constexpr double kK2 = 0.03;
    const int size = 2 * kRadius + 1;
    if (h < size || w < size)
        throw ValidationError("image smaller than the 11x11 SSIM window");
    const double peak = static_cast<double>(max_sample(bit_depth));
    const double c1 = (kK1 * peak) * (kK1 * peak);
    const double c2 = (kK2 * peak) * (kK2 * peak);
    static const std::vector<double> win = gaussian_window(kRadius, kSigma);

    double total = 0;
    long count = 0;
    for (int cy = kRadius; cy < h - kRadius; ++cy) {
        for (int cx = kRadius; cx < w - kRadius; ++cx) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int dy = -kRadius; dy <= kRadius; ++dy)
                for (int dx = -kRadius; dx <= kRadius; ++dx) {
                    const double wv =
                        win[static_cast<size_t>(dy + kRadius) * size + (dx + kRadius)];
                    const double xv = x[static_cast<size_t>(cy + dy) * w + (cx + dx)];
                    const double yv = y[static_cast<size_t>(cy + dy) * w + (cx + dx)];
                    mx += wv * xv;
                    my += wv * yv;
                    sxx += wv * xv * xv;
                    syy += wv * yv * yv;
                    sxy += wv * xv * yv;
                }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cxy = sxy - mx * my;
            const double ssim = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                                ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += ssim;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace detail

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), computed on
/// luma. Identical images score exactly 1.
inline double mssim(const BayerImage& a, const BayerImage& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw ValidationError("image dimension mismatch");
    if (a.bit_depth() != b.bit_depth())
        throw ValidationError("bit depth mismatch: samples are not comparable");
    return detail::mssim_planes(detail::luma_dn(a), detail::luma_dn(b), a.height(), a.width(),
                                a.bit_depth());
}

inline double mssim(const ColorImage& a, const ColorImage& b, int bit_depth) {
    if (a.height() != b.height() || a.width() != b.width())
        throw ValidationError("image dimension mismatch");
    return detail::mssim_planes(detail::luma_dn(a, bit_depth), detail::luma_dn(b, bit_depth),
                                a.height(), a.width(), bit_depth);
}

struct GaussianStats {
    int dim = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    void validate() const {
        if (dim < 1 || mean.size() != dim || cov.rows() != dim || cov.cols() != dim)
            throw ValidationError("inconsistent Gaussian statistics");
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < i; ++j)
                if (std::abs(cov(i, j) - cov(j, i)) > 1e-9)
                    throw ValidationError("covariance not symmetric");
    }
};

/// Sample mean and unbiased sample covariance of a set of feature vectors.
inline GaussianStats gaussian_stats(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw ValidationError("need at least 2 feature vectors");
    const size_t d = features.front().size();
    if (d == 0) throw ValidationError("empty feature vectors");
    for (const auto& f : features)
        if (f.size() != d) throw ValidationError("feature dimension mismatch");
    const auto n = static_cast<double>(features.size());
    GaussianStats s;
    s.dim = static_cast<int>(d);
    s.mean = Eigen::VectorXd::Zero(s.dim);
    for (const auto& f : features)
        for (size_t j = 0; j < d; ++j) s.mean(static_cast<Eigen::Index>(j)) += f[j];
    s.mean /= n;
    s.cov = Eigen::MatrixXd::Zero(s.dim, s.dim);
    for (const auto& f : features) {
        Eigen::VectorXd c(s.dim);
        for (size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(j)) = f[j] - s.mean(static_cast<Eigen::Index>(j));
        s.cov += c * c.transpose();
    }
    s.cov /= (n - 1.0);
    return s;
}

/// Squared Wasserstein-2 distance between two Gaussians:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the matrix
/// square root taken through the symmetric product S_a^(1/2) S_b S_a^(1/2).
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    a.validate();
    b.validate();
    if (a.dim != b.dim) throw ValidationError("Gaussian dimension mismatch");

    auto sqrt_psd = [](const Eigen::MatrixXd& m, const char* what) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
        if (es.info() != Eigen::Success) throw ValidationError("eigendecomposition failed");
        Eigen::VectorXd ev = es.eigenvalues();
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) < -1e-6)
                throw ValidationError(std::string(what) + " is not PSD (eigenvalue " +
                                      std::to_string(ev(i)) + ")");
            ev(i) = std::sqrt(std::max(ev(i), 0.0));
        }
        return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() *
                               es.eigenvectors().transpose());
    };

    const Eigen::MatrixXd a_half = sqrt_psd(a.cov, "first covariance");
    const Eigen::MatrixXd prod = a_half * b.cov * a_half;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (prod + prod.transpose()));
    if (es.info() != Eigen::Success) throw ValidationError("eigendecomposition failed");
    double tr_sqrt = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()(i);
        if (ev < -1e-6)
            throw ValidationError("covariance product is not PSD (eigenvalue " +
                                  std::to_string(ev) + ")");
        tr_sqrt += std::sqrt(std::max(ev, 0.0));
    }
    const double d2 = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() -
                      2.0 * tr_sqrt;
    if (d2 < -1e-6) throw ValidationError("negative squared distance beyond tolerance");
    return std::max(d2, 0.0);
}

// Feature-vector container for Frechet statistics: u32 count n, u32 dim d,
// then n*d float64 values in row order. Little-endian.

inline void write_feature_vectors(const std::vector<std::vector<double>>& features,
                                  const std::filesystem::path& path) {
    if (features.empty()) throw ValidationError("no feature vectors to write");
    const size_t d = features.front().size();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    write_u32le(out, static_cast<std::uint32_t>(features.size()));
    write_u32le(out, static_cast<std::uint32_t>(d));
    for (const auto& f : features) {
        if (f.size() != d) throw ValidationError("feature dimension mismatch");
        for (double v : f) write_f64le(out, v);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<std::vector<double>> read_feature_vectors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::uint32_t n = read_u32le(in);
    const std::uint32_t d = read_u32le(in);
    if (n == 0 || d == 0 || static_cast<unsigned long long>(n) * d > (1ULL << 28))
        throw IoError("implausible feature file shape in " + path.string());
    std::vector<std::vector<double>> features(n, std::vector<double>(d));
    for (auto& f : features)
        for (double& v : f) v = read_f64le(in);
    return features;
}

struct PairMetrics {
    std::string name;
    std::optional<double> mse;
    std::optional<double> psnr;
    std::optional<double> mssim;
};

struct MetricReport {
    std::vector<PairMetrics> pairs;
    std::optional<double> ave_psnr;
    std::optional<double> mssim_mean;
    std::optional<double> frechet;

    nlohmann::json to_json() const {
        auto encode = [](double v) -> nlohmann::json {
            // JSON has no infinity; the sentinel is the string "inf"
            if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
            return v;
        };
        nlohmann::json j;
        j["pairs"] = nlohmann::json::array();
        for (const auto& p : pairs) {
            nlohmann::json e;
            e["name"] = p.name;
            if (p.mse) e["mse"] = *p.mse;
            if (p.psnr) e["psnr"] = encode(*p.psnr);
            if (p.mssim) e["mssim"] = *p.mssim;
            j["pairs"].push_back(std::move(e));
        }
        if (ave_psnr) j["ave_psnr"] = encode(*ave_psnr);
        if (mssim_mean) j["mssim_mean"] = *mssim_mean;
        if (frechet) j["frechet"] = *frechet;
        return j;
    }
};

}  // namespace bayerisp::metrics
