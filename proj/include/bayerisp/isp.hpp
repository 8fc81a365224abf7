// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// Configurable ISP pipeline: a validated, ordered list of typed stages that
// can be run forward (RAW mosaic to display-referred color) and, when every
// stage is invertible, in reverse (color back to a synthetic RAW mosaic).
// Also houses the parametric radiometric camera model (diagonal white
// balance, 3x3 color transform, per-channel monotone polynomial response)
// with exact rendering and bisection-based inversion.
//
// Domain rules: stages before the single Demosaic stage operate on the
// Bayer mosaic (Linearize, Denoise, Noise), stages after it on the color
// image. Values are clamped to [0,1] after every color stage and the clamp
// events are tallied into a clip report, since clipped samples are exactly
// the ones a reverse run cannot restore.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "bayerisp/common.hpp"
#include "bayerisp/image.hpp"
#include "bayerisp/mosaic.hpp"

namespace bayerisp::isp {

enum class DenoiseMethod { None, BayerMedian3 };

struct Linearize {
    int black = 0;
    int white = 0;
};

struct Denoise {
    DenoiseMethod method = DenoiseMethod::None;
};

struct Demosaic {
    DemosaicAlg alg = DemosaicAlg::Bilinear;
};

struct WhiteBalance {
    // nullopt selects gray-world gains computed from the image at run time
    std::optional<std::array<double, 3>> gains;
};

struct ColorMatrix {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
};

struct Gamma {
    double a = 1.0;
};

struct ToneCurve {
    // per-channel coefficients c0..c5 of c0 + c1 x + ... + c5 x^5
    std::array<std::array<double, 6>, 3> coef{};
};

struct Resize {
    int out_h = 0;
    int out_w = 0;
    ResizeFilter filter = ResizeFilter::Bilinear;
};

enum class SeedPolicy { PerFile, Global };

struct Noise {
    double sigma = 0.0;          // Gaussian std in digital numbers
    double poisson_scale = 0.0;  // signal-proportional variance per DN
    SeedPolicy seed_policy = SeedPolicy::PerFile;
};

using IspStage = std::variant<Linearize, Denoise, Demosaic, WhiteBalance, ColorMatrix, Gamma,
                              ToneCurve, Resize, Noise>;

namespace detail {

inline bool is_bayer_stage(const IspStage& s) {
    return std::holds_alternative<Linearize>(s) || std::holds_alternative<Denoise>(s) ||
           std::holds_alternative<Noise>(s);
}

inline double poly_eval(const double* c, int n, double x) {
    double v = 0;
    for (int k = n - 1; k >= 0; --k) v = v * x + c[k];
    return v;
}

inline double poly_deriv(const double* c, int n, double x) {
    double v = 0;
    for (int k = n - 1; k >= 1; --k) v = v * x + k * c[k];
    return v;
}

/// Monotonicity probe used for every invertible curve: the derivative must
/// be positive at the 1024 interior midpoints of [0,1]. Probing midpoints
/// rather than endpoints admits curves with a single flat point at 0, such
/// as pure powers.
inline bool poly_increasing01(const double* c, int n) {
    for (int i = 0; i < 1024; ++i) {
        const double x = (i + 0.5) / 1024.0;
        if (!(poly_deriv(c, n, x) > 0)) return false;
    }
    return true;
}

/// Solves f(y) = v for monotone f on [0,1] to |f(y) - v| <= 1e-8.
inline double bisect_monotone(const double* c, int n, double v) {
    double lo = 0.0, hi = 1.0;
    double mid = 0.5;
    for (int it = 0; it < 60; ++it) {
        mid = 0.5 * (lo + hi);
        const double fv = poly_eval(c, n, mid);
        if (std::abs(fv - v) <= 1e-8) return mid;
        if (fv < v)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

inline double det3(const std::array<double, 9>& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

inline std::array<double, 9> inverse3(const std::array<double, 9>& m) {
    const double d = det3(m);
    if (std::abs(d) <= 1e-9) throw ValidationError("singular 3x3 matrix");
    return {(m[4] * m[8] - m[5] * m[7]) / d, (m[2] * m[7] - m[1] * m[8]) / d,
            (m[1] * m[5] - m[2] * m[4]) / d, (m[5] * m[6] - m[3] * m[8]) / d,
            (m[0] * m[8] - m[2] * m[6]) / d, (m[2] * m[3] - m[0] * m[5]) / d,
            (m[3] * m[7] - m[4] * m[6]) / d, (m[1] * m[6] - m[0] * m[7]) / d,
            (m[0] * m[4] - m[1] * m[3]) / d};
}

struct ClipCounter {
    long events = 0;
    long opportunities = 0;

    void tally(double raw_value) {
        ++opportunities;
        if (raw_value < -1e-12 || raw_value > 1.0 + 1e-12) ++events;
    }

    double fraction() const {
        return opportunities > 0 ? static_cast<double>(events) / static_cast<double>(opportunities)
                                 : 0.0;
    }
};

}  // namespace detail

class IspPipeline {
public:
    explicit IspPipeline(std::vector<IspStage> stages) : stages_(std::move(stages)) { validate(); }

    const std::vector<IspStage>& stages() const { return stages_; }

    bool has_demosaic() const {
        for (const auto& s : stages_)
            if (std::holds_alternative<Demosaic>(s)) return true;
        return false;
    }

    /// Structural validation: stage domains must be consistent with the
    /// single Demosaic boundary, and per-stage parameters must be sane.
    void validate() const {
        int demosaic_count = 0;
        bool linearized = false;
        for (const auto& s : stages_) {
            if (std::holds_alternative<Demosaic>(s)) {
                ++demosaic_count;
                if (demosaic_count > 1) throw ValidationError("more than one demosaic stage");
                continue;
            }
            if (demosaic_count == 0 && !detail::is_bayer_stage(s))
                throw ValidationError("color-domain stage before demosaic");
            if (demosaic_count > 0 && detail::is_bayer_stage(s))
                throw ValidationError("Bayer-domain stage after demosaic");
            if (const auto* lin = std::get_if<Linearize>(&s)) {
                if (lin->black < 0 || lin->black >= lin->white)
                    throw ValidationError("linearize requires 0 <= black < white");
                linearized = true;
            } else if (const auto* noise = std::get_if<Noise>(&s)) {
                if (noise->sigma < 0 || noise->poisson_scale < 0)
                    throw ValidationError("noise parameters must be nonnegative");
                if (linearized)
                    throw ValidationError(
                        "noise stage must precede linearize (noise acts on digital numbers)");
            } else if (const auto* g = std::get_if<Gamma>(&s)) {
                if (!(g->a > 0.0) || g->a > 1.0)
                    throw ValidationError("gamma exponent must be in (0, 1]");
            } else if (const auto* rs = std::get_if<Resize>(&s)) {
                if (rs->out_h < 2 || rs->out_w < 2 || rs->out_h % 2 != 0 || rs->out_w % 2 != 0)
                    throw ValidationError("resize target dimensions must be even and >= 2");
            } else if (const auto* wb = std::get_if<WhiteBalance>(&s)) {
                if (wb->gains)
                    for (double g : *wb->gains)
                        if (!(g > 0)) throw ValidationError("white balance gains must be positive");
            }
        }
    }

    /// Additional requirements for running in reverse. Reports the first
    /// obstacle found, or an empty string when reversible.
    std::string reversibility_obstacle() const {
        if (!has_demosaic()) return "no demosaic stage to anchor remosaicing";
        for (const auto& s : stages_) {
            if (const auto* dn = std::get_if<Denoise>(&s)) {
                if (dn->method != DenoiseMethod::None) return "denoise is not invertible";
            } else if (std::holds_alternative<Resize>(s)) {
                return "resize is not invertible; resample outside the reverse run";
            } else if (const auto* cm = std::get_if<ColorMatrix>(&s)) {
                if (std::abs(detail::det3(cm->m)) <= 1e-9) return "color matrix is singular";
            } else if (const auto* tc = std::get_if<ToneCurve>(&s)) {
                for (const auto& c : tc->coef)
                    if (!detail::poly_increasing01(c.data(), 6))
                        return "tone curve is not strictly increasing on [0,1]";
            }
        }
        return "";
    }

private:
    std::vector<IspStage> stages_;
};

/// g_G = 1, g_R = mean(G)/mean(R), g_B = mean(G)/mean(B).
inline std::array<double, 3> gray_world_gains(const ColorImage& color) {
    std::array<double, 3> mean{};
    for (int k = 0; k < 3; ++k) {
        double acc = 0;
        for (double v : color.planes()[k]) acc += v;
        mean[k] = acc / static_cast<double>(color.planes()[k].size());
        if (!(mean[k] > 0)) throw ValidationError("zero-mean plane: gray-world gains undefined");
    }
    return {mean[1] / mean[0], 1.0, mean[1] / mean[2]};
}

namespace detail {

inline ColorImage map_planes(const ColorImage& in, ClipCounter& clip,
                             const std::function<void(double&, double&, double&)>& f) {
    auto planes = in.planes();
    const size_t n = planes[0].size();
    for (size_t i = 0; i < n; ++i) {
        f(planes[0][i], planes[1][i], planes[2][i]);
        for (int k = 0; k < 3; ++k) {
            clip.tally(planes[k][i]);
            planes[k][i] = clamp01(planes[k][i]);
        }
    }
    return ColorImage(in.height(), in.width(), std::move(planes), in.color_state());
}

}  // namespace detail

inline ColorImage apply_white_balance(const ColorImage& color, const std::array<double, 3>& gains) {
    detail::ClipCounter clip;
    return detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
        r *= gains[0];
        g *= gains[1];
        b *= gains[2];
    });
}

inline ColorImage apply_color_matrix(const ColorImage& color, const std::array<double, 9>& m) {
    detail::ClipCounter clip;
    return detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
        const double nr = m[0] * r + m[1] * g + m[2] * b;
        const double ng = m[3] * r + m[4] * g + m[5] * b;
        const double nb = m[6] * r + m[7] * g + m[8] * b;
        r = nr;
        g = ng;
        b = nb;
    });
}

inline ColorImage gamma_compress(const ColorImage& color, double a) {
    if (!(a > 0.0) || a > 1.0) throw ValidationError("gamma exponent must be in (0, 1]");
    detail::ClipCounter clip;
    return detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
        r = std::pow(r, a);
        g = std::pow(g, a);
        b = std::pow(b, a);
    });
}

inline ColorImage gamma_expand(const ColorImage& color, double a) {
    if (!(a > 0.0) || a > 1.0) throw ValidationError("gamma exponent must be in (0, 1]");
    detail::ClipCounter clip;
    return detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
        r = std::pow(r, 1.0 / a);
        g = std::pow(g, 1.0 / a);
        b = std::pow(b, 1.0 / a);
    });
}

/// Heteroscedastic sensor noise: per sample one Gaussian draw with variance
/// poisson_scale * value + sigma^2, then rounding and clamping to the
/// sample range. Deterministic for a fixed seed.
inline BayerImage add_noise(const BayerImage& raw, double sigma, double poisson_scale,
                            std::uint64_t seed) {
    if (sigma < 0 || poisson_scale < 0) throw ValidationError("noise parameters must be nonnegative");
    if (sigma == 0 && poisson_scale == 0) return raw;
    GaussianSampler gauss(seed);
    std::vector<std::uint16_t> out(raw.samples().size());
    const int m = max_sample(raw.bit_depth());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = raw.samples()[i];
        const double std_dev = std::sqrt(sigma * sigma + poisson_scale * v);
        const double noisy = v + std_dev * gauss();
        const long q = round_half_away(noisy);
        out[i] = static_cast<std::uint16_t>(std::clamp(q, 0L, static_cast<long>(m)));
    }
    return BayerImage(raw.height(), raw.width(), raw.bit_depth(), std::move(out), raw.pattern(),
                      raw.black_level(), raw.white_level());
}

namespace detail {

/// 3x3 same-color median on the Bayer grid: neighbors of a site are the
/// sites two steps away in each direction, so the CFA phase is preserved.
template <typename T>
std::vector<T> bayer_median3(const std::vector<T>& s, int h, int w) {
    std::vector<T> out(s.size());
    std::array<T, 9> window;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int n = 0;
            for (int dy = -2; dy <= 2; dy += 2)
                for (int dx = -2; dx <= 2; dx += 2) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    window[static_cast<size_t>(n++)] = s[static_cast<size_t>(yy) * w + xx];
                }
            std::nth_element(window.begin(), window.begin() + 4, window.begin() + 9);
            out[static_cast<size_t>(y) * w + x] = window[4];
        }
    }
    return out;
}

}  // namespace detail

struct RunOptions {
    std::uint64_t seed = 0;
};

struct ForwardResult {
    ColorImage image;
    IspPipeline resolved;  // gray-world stages replaced by their computed gains
    long clip_events = 0;
    long clip_opportunities = 0;
    double clipped_fraction = 0;
};

/// Runs the stages in order. The returned pipeline has every data-dependent
/// stage resolved to fixed parameters (gray-world white balance becomes
/// fixed gains), which is what a later reverse run needs to undo the exact
/// transform that was applied.
inline ForwardResult run_forward(const IspPipeline& pipe, const BayerImage& raw,
                                 const RunOptions& options = {}) {
    pipe.validate();
    if (!pipe.has_demosaic()) throw ValidationError("pipeline has no demosaic stage");

    detail::ClipCounter clip;
    std::vector<IspStage> resolved;
    resolved.reserve(pipe.stages().size());

    // Bayer phase: integer samples until Linearize turns them into a
    // normalized real mosaic plane.
    std::vector<std::uint16_t> dn = raw.samples();
    std::vector<double> plane;
    bool linearized = false;
    const int h = raw.height();
    const int w = raw.width();

    size_t stage_index = 0;
    for (; stage_index < pipe.stages().size(); ++stage_index) {
        const IspStage& s = pipe.stages()[stage_index];
        if (std::holds_alternative<Demosaic>(s)) break;
        if (const auto* noise = std::get_if<Noise>(&s)) {
            const BayerImage noisy = add_noise(
                BayerImage(h, w, raw.bit_depth(), dn, raw.pattern()), noise->sigma,
                noise->poisson_scale, options.seed);
            dn = noisy.samples();
            resolved.push_back(s);
        } else if (const auto* den = std::get_if<Denoise>(&s)) {
            if (den->method == DenoiseMethod::BayerMedian3) {
                if (linearized)
                    plane = detail::bayer_median3(plane, h, w);
                else
                    dn = detail::bayer_median3(dn, h, w);
            }
            resolved.push_back(s);
        } else if (const auto* lin = std::get_if<Linearize>(&s)) {
            const double span = lin->white - lin->black;
            plane.resize(dn.size());
            for (size_t i = 0; i < dn.size(); ++i) {
                const double v = (static_cast<double>(dn[i]) - lin->black) / span;
                clip.tally(v);
                plane[i] = clamp01(v);
            }
            linearized = true;
            resolved.push_back(s);
        }
    }
    if (!linearized) {
        plane.resize(dn.size());
        for (size_t i = 0; i < dn.size(); ++i) plane[i] = dequantize(dn[i], raw.bit_depth());
    }

    const auto& demosaic_stage = std::get<Demosaic>(pipe.stages()[stage_index]);
    resolved.push_back(demosaic_stage);
    auto planes = demosaic_real(plane, h, w, raw.pattern(), demosaic_stage.alg);
    ColorImage color(h, w, std::move(planes), ColorState::SensorLinear);

    for (++stage_index; stage_index < pipe.stages().size(); ++stage_index) {
        const IspStage& s = pipe.stages()[stage_index];
        if (const auto* wb = std::get_if<WhiteBalance>(&s)) {
            const std::array<double, 3> gains = wb->gains ? *wb->gains : gray_world_gains(color);
            color = detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
                r *= gains[0];
                g *= gains[1];
                b *= gains[2];
            });
            resolved.push_back(WhiteBalance{gains});
        } else if (const auto* cm = std::get_if<ColorMatrix>(&s)) {
            color = detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
                const double nr = cm->m[0] * r + cm->m[1] * g + cm->m[2] * b;
                const double ng = cm->m[3] * r + cm->m[4] * g + cm->m[5] * b;
                const double nb = cm->m[6] * r + cm->m[7] * g + cm->m[8] * b;
                r = nr;
                g = ng;
                b = nb;
            });
            resolved.push_back(s);
        } else if (const auto* gm = std::get_if<Gamma>(&s)) {
            color = detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
                r = std::pow(r, gm->a);
                g = std::pow(g, gm->a);
                b = std::pow(b, gm->a);
            });
            resolved.push_back(s);
        } else if (const auto* tc = std::get_if<ToneCurve>(&s)) {
            color = detail::map_planes(color, clip, [&](double& r, double& g, double& b) {
                r = detail::poly_eval(tc->coef[0].data(), 6, r);
                g = detail::poly_eval(tc->coef[1].data(), 6, g);
                b = detail::poly_eval(tc->coef[2].data(), 6, b);
            });
            resolved.push_back(s);
        } else if (const auto* rs = std::get_if<Resize>(&s)) {
            color = resize_color(color, rs->out_h, rs->out_w, rs->filter);
            resolved.push_back(s);
        }
    }

    color.set_color_state(ColorState::DisplayReferred);
    ForwardResult result{std::move(color), IspPipeline(std::move(resolved)), clip.events,
                         clip.opportunities, 0.0};
    result.clipped_fraction = result.clip_opportunities > 0
                                  ? static_cast<double>(result.clip_events) /
                                        static_cast<double>(result.clip_opportunities)
                                  : 0.0;
    return result;
}

struct ReverseTarget {
    int bit_depth = 8;
    CfaPattern pattern = pattern_of("RGGB");
};

struct ReverseResult {
    BayerImage image;
    long clip_events = 0;
    long clip_opportunities = 0;
    double clipped_fraction = 0;
};

/// Applies the inverse of every stage in reverse order: color stages are
/// inverted analytically or by bisection, the Demosaic stage becomes exact
/// remosaicing, Linearize becomes de-linearization onto [black, white], and
/// a Noise stage injects noise into the final digital numbers (noise cannot
/// be removed, only reproduced).
///
/// A gray-world white balance stage that was never resolved to fixed gains
/// inverts as the identity: the incoming image is taken to be gray-balanced
/// already, which is the only self-consistent choice when the original
/// sensor illuminant is unknown. Reversing a resolved pipeline (the one
/// run_forward returns) restores the exact gains instead.
inline ReverseResult run_reverse(const IspPipeline& pipe, const ColorImage& color,
                                 const ReverseTarget& target, const RunOptions& options = {}) {
    pipe.validate();
    const std::string obstacle = pipe.reversibility_obstacle();
    if (!obstacle.empty()) throw ValidationError("pipeline is not reversible: " + obstacle);
    if (color.color_state() != ColorState::DisplayReferred)
        throw ValidationError("reverse input must be display-referred");
    if (color.height() % 2 != 0 || color.width() % 2 != 0)
        throw ValidationError("reverse requires even dimensions");

    detail::ClipCounter clip;
    ColorImage current = color;

    auto stage_it = pipe.stages().rbegin();
    for (; stage_it != pipe.stages().rend(); ++stage_it) {
        if (std::holds_alternative<Demosaic>(*stage_it)) break;
        if (const auto* wb = std::get_if<WhiteBalance>(&*stage_it)) {
            if (wb->gains) {
                const auto& g = *wb->gains;
                current = detail::map_planes(current, clip, [&](double& r, double& gg, double& b) {
                    r /= g[0];
                    gg /= g[1];
                    b /= g[2];
                });
            }
            // unresolved gray-world: identity (see contract above)
        } else if (const auto* cm = std::get_if<ColorMatrix>(&*stage_it)) {
            const std::array<double, 9> inv = detail::inverse3(cm->m);
            current = detail::map_planes(current, clip, [&](double& r, double& g, double& b) {
                const double nr = inv[0] * r + inv[1] * g + inv[2] * b;
                const double ng = inv[3] * r + inv[4] * g + inv[5] * b;
                const double nb = inv[6] * r + inv[7] * g + inv[8] * b;
                r = nr;
                g = ng;
                b = nb;
            });
        } else if (const auto* gm = std::get_if<Gamma>(&*stage_it)) {
            current = detail::map_planes(current, clip, [&](double& r, double& g, double& b) {
                r = std::pow(r, 1.0 / gm->a);
                g = std::pow(g, 1.0 / gm->a);
                b = std::pow(b, 1.0 / gm->a);
            });
        } else if (const auto* tc = std::get_if<ToneCurve>(&*stage_it)) {
            current = detail::map_planes(current, clip, [&](double& r, double& g, double& b) {
                double* vals[3] = {&r, &g, &b};
                for (int k = 0; k < 3; ++k) {
                    const double* c = tc->coef[static_cast<size_t>(k)].data();
                    const double lo = detail::poly_eval(c, 6, 0.0);
                    const double hi = detail::poly_eval(c, 6, 1.0);
                    double v = *vals[k];
                    if (v < lo - 1e-12 || v > hi + 1e-12) ++clip.events;
                    v = std::clamp(v, lo, hi);
                    *vals[k] = detail::bisect_monotone(c, 6, v);
                }
            });
        }
    }
    if (stage_it == pipe.stages().rend())
        throw ValidationError("pipeline has no demosaic stage");

    // remosaic: select the captured site's plane value at every pixel
    std::vector<double> plane =
        mosaic_real(current.planes(), current.height(), current.width(), target.pattern);

    // remaining (Bayer-phase) stages, still in reverse order; Noise is
    // handled after quantization and Denoise{none} is the identity
    std::vector<std::uint16_t> dn;
    std::optional<int> out_black, out_white;
    bool delinearized = false;
    const int m = max_sample(target.bit_depth);
    for (++stage_it; stage_it != pipe.stages().rend(); ++stage_it) {
        if (const auto* lin = std::get_if<Linearize>(&*stage_it)) {
            const double span = lin->white - lin->black;
            dn.resize(plane.size());
            for (size_t i = 0; i < plane.size(); ++i) {
                const long q = lin->black + round_half_away(plane[i] * span);
                dn[i] = static_cast<std::uint16_t>(std::clamp(q, 0L, static_cast<long>(m)));
            }
            out_black = lin->black;
            out_white = lin->white;
            delinearized = true;
        }
    }
    if (!delinearized) {
        dn.resize(plane.size());
        for (size_t i = 0; i < plane.size(); ++i) dn[i] = quantize(plane[i], target.bit_depth);
    }

    BayerImage image(current.height(), current.width(), target.bit_depth, std::move(dn),
                     target.pattern, out_black, out_white);

    // inject noise last so it lands on the final digital numbers
    for (const auto& s : pipe.stages()) {
        if (const auto* noise = std::get_if<Noise>(&s))
            image = add_noise(image, noise->sigma, noise->poisson_scale, options.seed);
    }

    ReverseResult result{std::move(image), clip.events, clip.opportunities, 0.0};
    result.clipped_fraction = result.clip_opportunities > 0
                                  ? static_cast<double>(result.clip_events) /
                                        static_cast<double>(result.clip_opportunities)
                                  : 0.0;
    return result;
}

/// Parametric radiometric model: I = f(T_s T_w kappa) with a diagonal
/// white-balance matrix T_w, a 3x3 color transform T_s, and per-channel
/// degree-5 polynomial responses f_k with f_k(0) = 0, each strictly
/// increasing on [0,1].
struct CameraModel {
    std::array<double, 3> white_balance{1, 1, 1};                  // diagonal of T_w
    std::array<double, 9> color_transform{1, 0, 0, 0, 1, 0, 0, 0, 1};  // T_s row-major
    // response coefficients c1..c5 of f(x) = c1 x + ... + c5 x^5
    std::array<std::array<double, 5>, 3> response{{{1, 0, 0, 0, 0}, {1, 0, 0, 0, 0},
                                                   {1, 0, 0, 0, 0}}};

    void validate() const {
        for (double g : white_balance)
            if (!(g > 0)) throw ValidationError("white balance gains must be positive");
        if (std::abs(detail::det3(color_transform)) <= 1e-9)
            throw ValidationError("color transform is singular");
        for (const auto& r : response) {
            // prepend the zero constant term for the shared polynomial helpers
            std::array<double, 6> full{0, r[0], r[1], r[2], r[3], r[4]};
            if (!detail::poly_increasing01(full.data(), 6))
                throw ValidationError("camera response is not strictly increasing on [0,1]");
        }
    }
};

/// Forward radiometric rendering: per pixel I = f(clamp(T_s T_w kappa)).
inline ColorImage render_camera(const CameraModel& model, const ColorImage& kappa) {
    model.validate();
    if (kappa.color_state() != ColorState::SensorLinear)
        throw ValidationError("camera input must be sensor-linear");
    detail::ClipCounter clip;
    ColorImage out = detail::map_planes(kappa, clip, [&](double& r, double& g, double& b) {
        const auto& m = model.color_transform;
        const double wr = model.white_balance[0] * r;
        const double wg = model.white_balance[1] * g;
        const double wb = model.white_balance[2] * b;
        double v[3] = {m[0] * wr + m[1] * wg + m[2] * wb, m[3] * wr + m[4] * wg + m[5] * wb,
                       m[6] * wr + m[7] * wg + m[8] * wb};
        for (int k = 0; k < 3; ++k) {
            const auto& c = model.response[static_cast<size_t>(k)];
            std::array<double, 6> full{0, c[0], c[1], c[2], c[3], c[4]};
            v[k] = detail::poly_eval(full.data(), 6, clamp01(v[k]));
        }
        r = v[0];
        g = v[1];
        b = v[2];
    });
    out.set_color_state(ColorState::DisplayReferred);
    return out;
}

struct CameraInversion {
    ColorImage kappa;
    long clip_events = 0;
    long clip_opportunities = 0;
    double clipped_fraction = 0;
};

/// Inverts the rendering per channel by bisection on the monotone response,
/// then applies (T_s T_w)^-1. Saturated pixels (outside the response range)
/// are counted in the clip report; their inversion is a clamp, not a
/// recovery.
inline CameraInversion invert_camera(const CameraModel& model, const ColorImage& rendered) {
    model.validate();
    const std::array<double, 9> ts_inv = detail::inverse3(model.color_transform);
    detail::ClipCounter clip;
    ColorImage out = detail::map_planes(rendered, clip, [&](double& r, double& g, double& b) {
        double v[3] = {r, g, b};
        for (int k = 0; k < 3; ++k) {
            const auto& c = model.response[static_cast<size_t>(k)];
            std::array<double, 6> full{0, c[0], c[1], c[2], c[3], c[4]};
            const double hi = detail::poly_eval(full.data(), 6, 1.0);
            if (v[k] < -1e-12 || v[k] > hi + 1e-12) ++clip.events;
            v[k] = detail::bisect_monotone(full.data(), 6, std::clamp(v[k], 0.0, hi));
        }
        const double ur = ts_inv[0] * v[0] + ts_inv[1] * v[1] + ts_inv[2] * v[2];
        const double ug = ts_inv[3] * v[0] + ts_inv[4] * v[1] + ts_inv[5] * v[2];
        const double ub = ts_inv[6] * v[0] + ts_inv[7] * v[1] + ts_inv[8] * v[2];
        r = ur / model.white_balance[0];
        g = ug / model.white_balance[1];
        b = ub / model.white_balance[2];
    });
    out.set_color_state(ColorState::SensorLinear);
    CameraInversion result{std::move(out), clip.events, clip.opportunities, 0.0};
    result.clipped_fraction = result.clip_opportunities > 0
                                  ? static_cast<double>(result.clip_events) /
                                        static_cast<double>(result.clip_opportunities)
                                  : 0.0;
    return result;
}

// Pipeline config files: {"stages":[{"type":...,...},...]}. Parsing is
// strict; any key outside a stage's schema is an error, so typos cannot
// silently change a conversion run.

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::vector<std::string>& required,
                         const std::vector<std::string>& optional, const std::string& where) {
    for (const auto& k : required)
        if (!obj.contains(k)) throw ValidationError(where + ": missing key '" + k + "'");
    for (const auto& item : obj.items()) {
        const std::string& k = item.key();
        if (std::find(required.begin(), required.end(), k) == required.end() &&
            std::find(optional.begin(), optional.end(), k) == optional.end())
            throw ValidationError(where + ": unknown key '" + k + "'");
    }
}

}  // namespace detail

inline nlohmann::json stage_to_json(const IspStage& s) {
    nlohmann::json j;
    if (const auto* lin = std::get_if<Linearize>(&s)) {
        j["type"] = "linearize";
        j["black"] = lin->black;
        j["white"] = lin->white;
    } else if (const auto* den = std::get_if<Denoise>(&s)) {
        j["type"] = "denoise";
        j["method"] = den->method == DenoiseMethod::None ? "none" : "bayer_median3";
    } else if (const auto* dm = std::get_if<Demosaic>(&s)) {
        j["type"] = "demosaic";
        j["alg"] = demosaic_alg_name(dm->alg);
    } else if (const auto* wb = std::get_if<WhiteBalance>(&s)) {
        j["type"] = "white_balance";
        if (wb->gains) {
            j["mode"] = "fixed";
            j["gains"] = {(*wb->gains)[0], (*wb->gains)[1], (*wb->gains)[2]};
        } else {
            j["mode"] = "gray_world";
        }
    } else if (const auto* cm = std::get_if<ColorMatrix>(&s)) {
        j["type"] = "color_matrix";
        j["m"] = cm->m;
    } else if (const auto* gm = std::get_if<Gamma>(&s)) {
        j["type"] = "gamma";
        j["a"] = gm->a;
    } else if (const auto* tc = std::get_if<ToneCurve>(&s)) {
        j["type"] = "tone_curve";
        j["coefficients"] = {tc->coef[0], tc->coef[1], tc->coef[2]};
    } else if (const auto* rs = std::get_if<Resize>(&s)) {
        j["type"] = "resize";
        j["height"] = rs->out_h;
        j["width"] = rs->out_w;
        j["filter"] = rs->filter == ResizeFilter::Box ? "box" : "bilinear";
    } else if (const auto* ns = std::get_if<Noise>(&s)) {
        j["type"] = "noise";
        j["sigma"] = ns->sigma;
        j["poisson_scale"] = ns->poisson_scale;
        j["seed_policy"] = ns->seed_policy == SeedPolicy::PerFile ? "per_file" : "global";
    }
    return j;
}

inline IspStage stage_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ValidationError(where + ": stage must be an object with a 'type' string");
    const std::string type = j["type"].get<std::string>();
    try {
        if (type == "linearize") {
            detail::require_keys(j, {"type", "black", "white"}, {}, where);
            return Linearize{j["black"].get<int>(), j["white"].get<int>()};
        }
        if (type == "denoise") {
            detail::require_keys(j, {"type", "method"}, {}, where);
            const std::string m = j["method"].get<std::string>();
            if (m == "none") return Denoise{DenoiseMethod::None};
            if (m == "bayer_median3") return Denoise{DenoiseMethod::BayerMedian3};
            throw ValidationError(where + ": unknown denoise method '" + m + "'");
        }
        if (type == "demosaic") {
            detail::require_keys(j, {"type", "alg"}, {}, where);
            return Demosaic{demosaic_alg_of(j["alg"].get<std::string>())};
        }
        if (type == "white_balance") {
            detail::require_keys(j, {"type", "mode"}, {"gains"}, where);
            const std::string mode = j["mode"].get<std::string>();
            if (mode == "gray_world") {
                if (j.contains("gains"))
                    throw ValidationError(where + ": gray_world mode takes no gains");
                return WhiteBalance{std::nullopt};
            }
            if (mode == "fixed") {
                const auto g = j.at("gains");
                if (!g.is_array() || g.size() != 3)
                    throw ValidationError(where + ": fixed mode needs gains [r, g, b]");
                return WhiteBalance{std::array<double, 3>{g[0].get<double>(), g[1].get<double>(),
                                                          g[2].get<double>()}};
            }
            throw ValidationError(where + ": unknown white balance mode '" + mode + "'");
        }
        if (type == "color_matrix") {
            detail::require_keys(j, {"type", "m"}, {}, where);
            const auto m = j["m"];
            if (!m.is_array() || m.size() != 9)
                throw ValidationError(where + ": color matrix needs 9 row-major entries");
            ColorMatrix cm;
            for (size_t i = 0; i < 9; ++i) cm.m[i] = m[i].get<double>();
            return cm;
        }
        if (type == "gamma") {
            detail::require_keys(j, {"type", "a"}, {}, where);
            return Gamma{j["a"].get<double>()};
        }
        if (type == "tone_curve") {
            detail::require_keys(j, {"type", "coefficients"}, {}, where);
            const auto c = j["coefficients"];
            if (!c.is_array() || c.size() != 3)
                throw ValidationError(where + ": tone curve needs 3 coefficient lists");
            ToneCurve tc{};
            for (size_t k = 0; k < 3; ++k) {
                if (!c[k].is_array() || c[k].empty() || c[k].size() > 6)
                    throw ValidationError(where + ": tone curve coefficients must be 1..6 values");
                for (size_t i = 0; i < c[k].size(); ++i) tc.coef[k][i] = c[k][i].get<double>();
            }
            return tc;
        }
        if (type == "resize") {
            detail::require_keys(j, {"type", "height", "width", "filter"}, {}, where);
            return Resize{j["height"].get<int>(), j["width"].get<int>(),
                          resize_filter_of(j["filter"].get<std::string>())};
        }
        if (type == "noise") {
            detail::require_keys(j, {"type", "sigma", "poisson_scale"}, {"seed_policy"}, where);
            Noise n{j["sigma"].get<double>(), j["poisson_scale"].get<double>(),
                    SeedPolicy::PerFile};
            if (j.contains("seed_policy")) {
                const std::string p = j["seed_policy"].get<std::string>();
                if (p == "per_file")
                    n.seed_policy = SeedPolicy::PerFile;
                else if (p == "global")
                    n.seed_policy = SeedPolicy::Global;
                else
                    throw ValidationError(where + ": unknown seed policy '" + p + "'");
            }
            return n;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
    throw ValidationError(where + ": unknown stage type '" + type + "'");
}

inline nlohmann::json pipeline_to_json(const IspPipeline& pipe) {
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : pipe.stages()) j["stages"].push_back(stage_to_json(s));
    return j;
}

inline IspPipeline pipeline_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("pipeline config must be a JSON object");
    detail::require_keys(j, {"stages"}, {}, "pipeline config");
    if (!j["stages"].is_array()) throw ValidationError("pipeline 'stages' must be an array");
    std::vector<IspStage> stages;
    size_t index = 0;
    for (const auto& sj : j["stages"]) {
        stages.push_back(stage_from_json(sj, "stage " + std::to_string(index)));
        ++index;
    }
    return IspPipeline(std::move(stages));
}

inline IspPipeline read_pipeline(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pipeline config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed pipeline config " + path.string() + ": " + e.what());
    }
    return pipeline_from_json(j);
}

inline void write_pipeline(const IspPipeline& pipe, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write pipeline config " + path.string());
    out << pipeline_to_json(pipe).dump(2) << "\n";
}

}  // namespace bayerisp::isp
