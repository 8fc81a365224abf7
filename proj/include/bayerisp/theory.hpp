// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// Numeric verification kernels for the adversarial-training math this
// toolkit rests on: Jensen-Shannon divergence, the optimal discriminator and
// the value function it induces, pushforward of distributions under
// invertible maps (where JS must be invariant), convolution weight
// demodulation, and the loss arithmetic used on feature tensors.
//
// Distributions come in two flavors: finite discrete, where invariance under
// a permutation is exact, and 1-D gridded densities, where invariance under
// a strictly monotone piecewise-linear map holds to quadrature accuracy.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "bayerisp/common.hpp"

namespace bayerisp::theory {

class DiscreteDistribution {
public:
    explicit DiscreteDistribution(std::vector<double> probs) : p_(std::move(probs)) {
        if (p_.empty()) throw ValidationError("empty distribution");
        double sum = 0;
        for (double v : p_) {
            if (!(v >= 0)) throw ValidationError("negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ValidationError("probabilities sum to " + std::to_string(sum) + ", not 1");
    }

    /// Builds a distribution from nonnegative weights by normalizing them.
    static DiscreteDistribution normalized(std::vector<double> weights) {
        double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (!(sum > 0)) throw ValidationError("weights must have positive sum");
        for (double& v : weights) v /= sum;
        // renormalize the largest entry so the total is exactly 1 in fp
        double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        auto it = std::max_element(weights.begin(), weights.end());
        *it += 1.0 - total;
        return DiscreteDistribution(std::move(weights));
    }

    size_t size() const { return p_.size(); }
    const std::vector<double>& probs() const { return p_; }
    double operator[](size_t i) const { return p_[i]; }

private:
    std::vector<double> p_;
};

/// Piecewise-constant density on a uniform grid over [lo, hi], integrating
/// to 1 by the midpoint rule.
class GriddedDensity {
public:
    GriddedDensity(double lo, double hi, std::vector<double> density)
        : lo_(lo), hi_(hi), d_(std::move(density)) {
        if (!(hi > lo)) throw ValidationError("empty density domain");
        if (d_.empty()) throw ValidationError("empty density grid");
        const double cw = cell_width();
        prefix_mass_.resize(d_.size() + 1, 0.0);
        for (size_t i = 0; i < d_.size(); ++i) {
            if (!(d_[i] >= 0)) throw ValidationError("negative density");
            prefix_mass_[i + 1] = prefix_mass_[i] + d_[i] * cw;
        }
        if (std::abs(prefix_mass_.back() - 1.0) > 1e-9)
            throw ValidationError("density integrates to " + std::to_string(prefix_mass_.back()) +
                                  ", not 1");
    }

    static GriddedDensity normalized(double lo, double hi, std::vector<double> weights) {
        if (!(hi > lo)) throw ValidationError("empty density domain");
        const double cw = (hi - lo) / static_cast<double>(weights.size());
        double mass = 0;
        for (double v : weights) {
            if (!(v >= 0)) throw ValidationError("negative density weight");
            mass += v * cw;
        }
        if (!(mass > 0)) throw ValidationError("density weights must have positive mass");
        for (double& v : weights) v /= mass;
        return GriddedDensity(lo, hi, std::move(weights));
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    size_t cells() const { return d_.size(); }
    double cell_width() const { return (hi_ - lo_) / static_cast<double>(d_.size()); }
    const std::vector<double>& density() const { return d_; }

    /// Cumulative mass on [lo, x]; piecewise linear, exact for this density.
    double cdf(double x) const {
        if (x <= lo_) return 0.0;
        if (x >= hi_) return 1.0;
        const double cw = cell_width();
        const auto n = static_cast<long>(d_.size());
        const long i = std::clamp(static_cast<long>((x - lo_) / cw), 0L, n - 1);
        return prefix_mass_[static_cast<size_t>(i)] +
               d_[static_cast<size_t>(i)] * (x - (lo_ + static_cast<double>(i) * cw));
    }

private:
    double lo_;
    double hi_;
    std::vector<double> d_;
    std::vector<double> prefix_mass_;  // prefix_mass_[i] = mass of cells [0, i)
};

/// An invertible transformation: a permutation of support indices in the
/// discrete case, a strictly increasing piecewise-linear function in the
/// continuous case.
class InvertibleMap {
public:
    static InvertibleMap permutation(std::vector<int> perm) {
        InvertibleMap m;
        std::vector<char> seen(perm.size(), 0);
        for (int v : perm) {
            if (v < 0 || static_cast<size_t>(v) >= perm.size() || seen[static_cast<size_t>(v)])
                throw ValidationError("not a permutation");
            seen[static_cast<size_t>(v)] = 1;
        }
        m.perm_ = std::move(perm);
        return m;
    }

    /// Breakpoints xs (strictly increasing, spanning the domain) mapped to
    /// values ys (strictly increasing). Slopes are positive by construction.
    static InvertibleMap piecewise_linear(std::vector<double> xs, std::vector<double> ys) {
        if (xs.size() != ys.size() || xs.size() < 2)
            throw ValidationError("piecewise-linear map needs matching breakpoint lists, size >= 2");
        for (size_t i = 1; i < xs.size(); ++i) {
            if (!(xs[i] > xs[i - 1]) || !(ys[i] > ys[i - 1]))
                throw ValidationError("piecewise-linear map must be strictly increasing");
        }
        InvertibleMap m;
        m.xs_ = std::move(xs);
        m.ys_ = std::move(ys);
        return m;
    }

    bool is_permutation() const { return !perm_.empty(); }
    const std::vector<int>& perm() const { return perm_; }
    double domain_lo() const { return xs_.front(); }
    double domain_hi() const { return xs_.back(); }
    double range_lo() const { return ys_.front(); }
    double range_hi() const { return ys_.back(); }

    double operator()(double x) const { return eval(xs_, ys_, x); }
    double inverse(double y) const { return eval(ys_, xs_, y); }

private:
    static double eval(const std::vector<double>& from, const std::vector<double>& to, double v) {
        if (from.empty()) throw ValidationError("map has no continuous part");
        const auto it = std::upper_bound(from.begin(), from.end(), v);
        size_t i1 = std::clamp<size_t>(static_cast<size_t>(it - from.begin()), 1, from.size() - 1);
        const size_t i0 = i1 - 1;
        const double t = (v - from[i0]) / (from[i1] - from[i0]);
        return to[i0] + t * (to[i1] - to[i0]);
    }

    std::vector<int> perm_;
    std::vector<double> xs_;
    std::vector<double> ys_;
};

namespace detail {

// One summand of JS: contribution of mass a against the mixture (a+b)/2.
// The 0*log(0) convention makes zero-mass points contribute nothing.
inline double js_term(double a, double b) {
    if (a <= 0) return 0.0;
    return 0.5 * a * std::log(2.0 * a / (a + b));
}

}  // namespace detail

/// Jensen-Shannon divergence with natural logarithm; range [0, ln 2].
inline double js_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    if (p.size() != q.size()) throw ValidationError("mismatched supports");
    double js = 0;
    for (size_t i = 0; i < p.size(); ++i)
        js += detail::js_term(p[i], q[i]) + detail::js_term(q[i], p[i]);
    return js;
}

inline double js_divergence(const GriddedDensity& p, const GriddedDensity& q) {
    if (p.cells() != q.cells() || std::abs(p.lo() - q.lo()) > 1e-9 ||
        std::abs(p.hi() - q.hi()) > 1e-9)
        throw ValidationError("mismatched grids");
    const double cw = p.cell_width();
    double js = 0;
    for (size_t i = 0; i < p.cells(); ++i)
        js += cw * (detail::js_term(p.density()[i], q.density()[i]) +
                    detail::js_term(q.density()[i], p.density()[i]));
    return js;
}

/// Pointwise p/(p+q); the discriminator that maximizes the value function.
/// Points carrying no mass under either distribution get 1/2.
inline std::vector<double> optimal_discriminator(const DiscreteDistribution& p_data,
                                                 const DiscreteDistribution& p_g) {
    if (p_data.size() != p_g.size()) throw ValidationError("mismatched supports");
    std::vector<double> d(p_data.size());
    for (size_t i = 0; i < d.size(); ++i) {
        const double denom = p_data[i] + p_g[i];
        d[i] = denom > 0 ? p_data[i] / denom : 0.5;
    }
    return d;
}

/// E_data[log D] + E_g[log(1-D)], the two-player objective at a fixed
/// discriminator. D is clamped away from {0,1} before the logs.
inline double gan_value(const DiscreteDistribution& p_data, const DiscreteDistribution& p_g,
                        const std::vector<double>& discriminator) {
    if (p_data.size() != p_g.size() || discriminator.size() != p_data.size())
        throw ValidationError("mismatched lengths");
    double v = 0;
    for (size_t i = 0; i < discriminator.size(); ++i) {
        const double d = std::clamp(discriminator[i], 1e-12, 1.0 - 1e-12);
        if (p_data[i] > 0) v += p_data[i] * std::log(d);
        if (p_g[i] > 0) v += p_g[i] * std::log(1.0 - d);
    }
    return v;
}

/// Closed form of the value function at the optimal discriminator:
/// -ln 4 + 2 JS(p_data || p_g). Minimum -ln 4 at p_data == p_g.
inline double virtual_criterion(const DiscreteDistribution& p_data,
                                const DiscreteDistribution& p_g) {
    return -std::log(4.0) + 2.0 * js_divergence(p_data, p_g);
}

/// Change of variables. Discrete: mass at i moves to perm[i].
inline DiscreteDistribution pushforward(const DiscreteDistribution& p, const InvertibleMap& t) {
    if (!t.is_permutation()) throw ValidationError("discrete pushforward needs a permutation");
    if (t.perm().size() != p.size()) throw ValidationError("permutation size mismatch");
    std::vector<double> q(p.size());
    for (size_t i = 0; i < p.size(); ++i) q[static_cast<size_t>(t.perm()[i])] = p[i];
    return DiscreteDistribution(std::move(q));
}

/// Continuous change of variables onto a uniform grid over T([lo, hi]).
/// Each output cell receives exactly the source mass of its preimage
/// interval (computed through the piecewise-linear CDF), so total mass is
/// conserved up to rounding and the density equals p(T^-1(y)) |dT^-1/dy|
/// up to the grid resolution.
inline GriddedDensity pushforward(const GriddedDensity& p, const InvertibleMap& t) {
    if (t.is_permutation()) throw ValidationError("continuous pushforward needs a continuous map");
    if (std::abs(t.domain_lo() - p.lo()) > 1e-9 || std::abs(t.domain_hi() - p.hi()) > 1e-9)
        throw ValidationError("map domain does not match density domain");
    const size_t n = p.cells();
    const double out_lo = t.range_lo();
    const double out_hi = t.range_hi();
    const double out_cw = (out_hi - out_lo) / static_cast<double>(n);
    std::vector<double> d(n);
    double prev_cdf = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double edge = i + 1 == n ? out_hi : out_lo + static_cast<double>(i + 1) * out_cw;
        const double c = p.cdf(t.inverse(edge));
        d[i] = (c - prev_cdf) / out_cw;
        prev_cdf = c;
    }
    // guard against tiny negative round-off before revalidation
    for (double& v : d) v = std::max(v, 0.0);
    return GriddedDensity(out_lo, out_hi, std::move(d));
}

/// Many-to-one reindexing; NOT a valid change of variables. Exists as the
/// negative control that shows JS is not preserved once invertibility is
/// dropped.
inline DiscreteDistribution fold_pushforward(const DiscreteDistribution& p,
                                             const std::vector<int>& mapping, size_t out_size) {
    if (mapping.size() != p.size()) throw ValidationError("mapping size mismatch");
    std::vector<double> q(out_size, 0.0);
    for (size_t i = 0; i < p.size(); ++i) {
        if (mapping[i] < 0 || static_cast<size_t>(mapping[i]) >= out_size)
            throw ValidationError("mapping target out of range");
        q[static_cast<size_t>(mapping[i])] += p[i];
    }
    return DiscreteDistribution(std::move(q));
}

struct JsInvarianceReport {
    double js_before = 0;
    double js_after = 0;
    double abs_diff = 0;
    double tolerance = 0;
    bool pass = false;
};

inline JsInvarianceReport verify_js_invariance(const DiscreteDistribution& p,
                                               const DiscreteDistribution& q,
                                               const InvertibleMap& t) {
    JsInvarianceReport r;
    r.js_before = js_divergence(p, q);
    r.js_after = js_divergence(pushforward(p, t), pushforward(q, t));
    r.abs_diff = std::abs(r.js_after - r.js_before);
    r.tolerance = 1e-12;
    r.pass = r.abs_diff <= r.tolerance;
    return r;
}

inline JsInvarianceReport verify_js_invariance(const GriddedDensity& p, const GriddedDensity& q,
                                               const InvertibleMap& t) {
    JsInvarianceReport r;
    r.js_before = js_divergence(p, q);
    r.js_after = js_divergence(pushforward(p, t), pushforward(q, t));
    r.abs_diff = std::abs(r.js_after - r.js_before);
    r.tolerance = 1e-6;
    r.pass = r.abs_diff <= r.tolerance;
    return r;
}

/// Convolution weights w[i][j][kh][kw] (input channel, output channel,
/// kernel row, kernel column) with per-input-channel scales.
struct WeightTensor {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    std::vector<double> w;  // index ((i*out_channels + j)*kernel_h + a)*kernel_w + b
    std::vector<double> s;  // size in_channels
    double epsilon = 1e-8;

    void validate() const {
        if (in_channels < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1)
            throw ValidationError("weight tensor dimensions must be positive");
        const size_t expect = static_cast<size_t>(in_channels) * out_channels * kernel_h * kernel_w;
        if (w.size() != expect || s.size() != static_cast<size_t>(in_channels))
            throw ValidationError("weight tensor size mismatch");
        if (!(epsilon >= 0)) throw ValidationError("epsilon must be nonnegative");
        for (double v : w)
            if (!std::isfinite(v)) throw ValidationError("non-finite weight");
        for (double v : s)
            if (!std::isfinite(v)) throw ValidationError("non-finite scale");
    }

    size_t index(int i, int j, int a, int b) const {
        return ((static_cast<size_t>(i) * out_channels + j) * kernel_h + a) * kernel_w + b;
    }
};

/// Scales each input channel by s_i, then normalizes per output channel so
/// the scaled kernel has (near-)unit L2 norm. With epsilon = 0 the norm is
/// exactly 1, which requires every output channel to have nonzero scaled
/// weights.
inline WeightTensor weight_demodulate(const WeightTensor& in) {
    in.validate();
    WeightTensor out = in;
    for (int j = 0; j < in.out_channels; ++j) {
        double sq = 0;
        for (int i = 0; i < in.in_channels; ++i)
            for (int a = 0; a < in.kernel_h; ++a)
                for (int b = 0; b < in.kernel_w; ++b) {
                    const double v = in.s[static_cast<size_t>(i)] * in.w[in.index(i, j, a, b)];
                    sq += v * v;
                }
        const double denom = std::sqrt(sq + in.epsilon);
        if (!(denom > 0))
            throw ValidationError("zero demodulation denominator: output channel " +
                                  std::to_string(j) + " has no scaled weight mass");
        for (int i = 0; i < in.in_channels; ++i)
            for (int a = 0; a < in.kernel_h; ++a)
                for (int b = 0; b < in.kernel_w; ++b) {
                    const size_t k = in.index(i, j, a, b);
                    out.w[k] = in.s[static_cast<size_t>(i)] * in.w[k] / denom;
                }
    }
    std::fill(out.s.begin(), out.s.end(), 1.0);  // scales are baked in
    return out;
}

struct FeatureTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;  // C-order: channel, row, column

    void validate() const {
        if (channels < 1 || height < 1 || width < 1)
            throw ValidationError("feature tensor dimensions must be positive");
        if (data.size() != static_cast<size_t>(channels) * height * width)
            throw ValidationError("feature tensor size mismatch");
    }
};

/// Sum over layers of the size-normalized L1 distance between paired
/// feature tensors.
inline double feature_matching_loss(const std::vector<FeatureTensor>& real,
                                    const std::vector<FeatureTensor>& fake) {
    if (real.size() != fake.size()) throw ValidationError("feature list length mismatch");
    double loss = 0;
    for (size_t i = 0; i < real.size(); ++i) {
        real[i].validate();
        fake[i].validate();
        if (real[i].channels != fake[i].channels || real[i].height != fake[i].height ||
            real[i].width != fake[i].width)
            throw ValidationError("feature shape mismatch at layer " + std::to_string(i));
        double l1 = 0;
        for (size_t k = 0; k < real[i].data.size(); ++k)
            l1 += std::abs(real[i].data[k] - fake[i].data[k]);
        loss += l1 / static_cast<double>(real[i].data.size());
    }
    return loss;
}

/// Default block weights; configuration values, not calibrated constants.
inline constexpr std::array<double, 5> kDefaultPerceptualWeights{1.0 / 32, 1.0 / 16, 1.0 / 8,
                                                                 1.0 / 4, 1.0};

/// Weighted size-normalized L1 distance over exactly five feature blocks.
inline double perceptual_loss(const std::vector<FeatureTensor>& real,
                              const std::vector<FeatureTensor>& fake,
                              const std::array<double, 5>& weights = kDefaultPerceptualWeights) {
    if (real.size() != 5 || fake.size() != 5)
        throw ValidationError("perceptual loss expects exactly 5 blocks");
    double loss = 0;
    for (size_t i = 0; i < 5; ++i) {
        std::vector<FeatureTensor> a{real[i]};
        std::vector<FeatureTensor> b{fake[i]};
        loss += weights[i] * feature_matching_loss(a, b);
    }
    return loss;
}

/// Default balance between the adversarial term and the two feature terms;
/// configuration values, not calibrated constants.
inline constexpr double kDefaultFeatureWeight = 10.0;
inline constexpr double kDefaultPerceptualWeight = 10.0;

inline double total_loss(double l_gan, double l_fm, double l_vgg,
                         double alpha1 = kDefaultFeatureWeight,
                         double alpha2 = kDefaultPerceptualWeight) {
    return l_gan + alpha1 * l_fm + alpha2 * l_vgg;
}

// Feature tensor container: u32 layer count M, then (C,H,W) u32 triples per
// layer, then each layer's C*H*W float64 payload in C-order. Little-endian.

inline void write_feature_tensors(const std::vector<FeatureTensor>& layers,
                                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    write_u32le(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto& t : layers) {
        t.validate();
        write_u32le(out, static_cast<std::uint32_t>(t.channels));
        write_u32le(out, static_cast<std::uint32_t>(t.height));
        write_u32le(out, static_cast<std::uint32_t>(t.width));
    }
    for (const auto& t : layers)
        for (double v : t.data) write_f64le(out, v);
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<FeatureTensor> read_feature_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::uint32_t m = read_u32le(in);
    if (m > 1024) throw IoError("implausible layer count in " + path.string());
    std::vector<FeatureTensor> layers(m);
    for (auto& t : layers) {
        t.channels = static_cast<int>(read_u32le(in));
        t.height = static_cast<int>(read_u32le(in));
        t.width = static_cast<int>(read_u32le(in));
        if (t.channels < 1 || t.height < 1 || t.width < 1 ||
            static_cast<long long>(t.channels) * t.height * t.width > (1LL << 28))
            throw IoError("implausible layer shape in " + path.string());
    }
    for (auto& t : layers) {
        t.data.resize(static_cast<size_t>(t.channels) * t.height * t.width);
        for (double& v : t.data) v = read_f64le(in);
    }
    return layers;
}

/// Full central-difference Jacobian of a small image-to-image map. Row r,
/// column c holds d out[r] / d in[c].
inline std::vector<std::vector<double>> numerical_jacobian(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h) {
    if (!(h > 0)) throw ValidationError("step must be positive");
    if (x.size() > 144) throw ValidationError("input too large for a dense Jacobian (max 12x12)");
    const size_t out_dim = f(x).size();
    std::vector<std::vector<double>> jac(out_dim, std::vector<double>(x.size()));
    std::vector<double> xp = x;
    for (size_t c = 0; c < x.size(); ++c) {
        xp[c] = x[c] + h;
        const std::vector<double> fp = f(xp);
        xp[c] = x[c] - h;
        const std::vector<double> fm = f(xp);
        xp[c] = x[c];
        if (fp.size() != out_dim || fm.size() != out_dim)
            throw ValidationError("map output dimension is not constant");
        for (size_t r = 0; r < out_dim; ++r) jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
    }
    return jac;
}

}  // namespace bayerisp::theory
