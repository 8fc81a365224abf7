// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// Sampling operators on the Bayer lattice: mosaic (color to CFA), demosaic
// (CFA to color), periodic-shuffle packing, superpixel down-sampling, and
// color resizing.
//
// Mosaic selects the pattern-designated plane value at every site, so it is
// an exact left inverse of any demosaicer that preserves captured samples.
// All demosaicers here overwrite captured sites with the original normalized
// sample after interpolation, which makes that preservation immune to
// floating-point round-off in the interpolation arithmetic.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bayerisp/common.hpp"
#include "bayerisp/image.hpp"

namespace bayerisp {

enum class DemosaicAlg { Nearest, Bilinear, Hybrid };

inline DemosaicAlg demosaic_alg_of(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "nearest") return DemosaicAlg::Nearest;
    if (s == "bilinear") return DemosaicAlg::Bilinear;
    if (s == "hybrid") return DemosaicAlg::Hybrid;
    throw ValidationError("unknown demosaic algorithm: " + name);
}

inline const char* demosaic_alg_name(DemosaicAlg a) {
    switch (a) {
        case DemosaicAlg::Nearest: return "nearest";
        case DemosaicAlg::Bilinear: return "bilinear";
        case DemosaicAlg::Hybrid: return "hybrid";
    }
    return "?";
}

enum class ResizeFilter { Box, Bilinear };

inline ResizeFilter resize_filter_of(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "box") return ResizeFilter::Box;
    if (s == "bilinear") return ResizeFilter::Bilinear;
    throw ValidationError("unknown resize filter: " + name);
}

/// Selects the pattern-designated plane value at every site. Pure selection,
/// no neighborhood mixing.
inline std::vector<double> mosaic_real(const std::array<std::vector<double>, 3>& planes,
                                       int height, int width, const CfaPattern& pattern) {
    std::vector<double> out(static_cast<size_t>(height) * width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Channel c = pattern.color_at(y, x);
            out[static_cast<size_t>(y) * width + x] =
                planes[static_cast<int>(c)][static_cast<size_t>(y) * width + x];
        }
    }
    return out;
}

inline BayerImage mosaic(const ColorImage& color, const CfaPattern& pattern, int bit_depth,
                         std::optional<int> black_level = std::nullopt,
                         std::optional<int> white_level = std::nullopt) {
    if (color.height() % 2 != 0 || color.width() % 2 != 0)
        throw ValidationError("mosaic requires even dimensions");
    std::vector<double> sel = mosaic_real(color.planes(), color.height(), color.width(), pattern);
    std::vector<std::uint16_t> samples(sel.size());
    for (size_t i = 0; i < sel.size(); ++i) samples[i] = quantize(sel[i], bit_depth);
    return BayerImage(color.height(), color.width(), bit_depth, std::move(samples), pattern,
                      black_level, white_level);
}

namespace detail {

inline double fetch(const std::vector<double>& m, int h, int w, int y, int x) {
    // border: reflect about the edge pixel. The reflection moves an index by
    // an even amount, so it keeps row and column parity and a neighbor fetch
    // never reads a site of another color.
    if (y < 0) y = -y;
    if (y >= h) y = 2 * h - 2 - y;
    if (x < 0) x = -x;
    if (x >= w) x = 2 * w - 2 - x;
    return m[static_cast<size_t>(y) * w + x];
}

inline void demosaic_nearest(const std::vector<double>& m, int h, int w, const CfaPattern& pat,
                             std::array<std::vector<double>, 3>& out) {
    const CellOffset ro = pat.offset_of(Channel::R);
    const CellOffset bo = pat.offset_of(Channel::B);
    // each cell row holds exactly one G site; copy the same-row G
    std::array<int, 2> gcol{};
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            if (pat.color_at(r, c) == Channel::G) gcol[r] = c;
    for (int y = 0; y < h; ++y) {
        const int y0 = y & ~1;
        for (int x = 0; x < w; ++x) {
            const int x0 = x & ~1;
            const size_t i = static_cast<size_t>(y) * w + x;
            out[0][i] = m[static_cast<size_t>(y0 + ro.row) * w + (x0 + ro.col)];
            out[1][i] = m[static_cast<size_t>(y) * w + (x0 + gcol[y & 1])];
            out[2][i] = m[static_cast<size_t>(y0 + bo.row) * w + (x0 + bo.col)];
        }
    }
}

inline void demosaic_bilinear(const std::vector<double>& m, int h, int w, const CfaPattern& pat,
                              std::array<std::vector<double>, 3>& out) {
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const Channel c = pat.color_at(y, x);
            if (c == Channel::G) {
                const double hmean = (fetch(m, h, w, y, x - 1) + fetch(m, h, w, y, x + 1)) / 2.0;
                const double vmean = (fetch(m, h, w, y - 1, x) + fetch(m, h, w, y + 1, x)) / 2.0;
                out[1][i] = m[i];
                // the horizontal neighbors share this row's non-green color
                if (pat.color_at(y, x ^ 1) == Channel::R) {
                    out[0][i] = hmean;
                    out[2][i] = vmean;
                } else {
                    out[0][i] = vmean;
                    out[2][i] = hmean;
                }
            } else {
                const double cross = (fetch(m, h, w, y - 1, x) + fetch(m, h, w, y + 1, x) +
                                      fetch(m, h, w, y, x - 1) + fetch(m, h, w, y, x + 1)) /
                                     4.0;
                const double diag = (fetch(m, h, w, y - 1, x - 1) + fetch(m, h, w, y - 1, x + 1) +
                                     fetch(m, h, w, y + 1, x - 1) + fetch(m, h, w, y + 1, x + 1)) /
                                    4.0;
                out[1][i] = cross;
                if (c == Channel::R) {
                    out[0][i] = m[i];
                    out[2][i] = diag;
                } else {
                    out[2][i] = m[i];
                    out[0][i] = diag;
                }
            }
        }
    }
}

/// Bilinear sample of a quarter-resolution lattice at fractional lattice
/// coordinates, with index clamping in lattice units.
inline double lattice_bilinear(const std::vector<double>& d, int lh, int lw, double ly, double lx) {
    const double fy = std::floor(ly);
    const double fx = std::floor(lx);
    const double ty = ly - fy;
    const double tx = lx - fx;
    const int y0 = std::clamp(static_cast<int>(fy), 0, lh - 1);
    const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, lh - 1);
    const int x0 = std::clamp(static_cast<int>(fx), 0, lw - 1);
    const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, lw - 1);
    const double a = d[static_cast<size_t>(y0) * lw + x0] * (1 - tx) +
                     d[static_cast<size_t>(y0) * lw + x1] * tx;
    const double b = d[static_cast<size_t>(y1) * lw + x0] * (1 - tx) +
                     d[static_cast<size_t>(y1) * lw + x1] * tx;
    return a * (1 - ty) + b * ty;
}

/// Color-difference interpolation: bilinear G, then bilinear interpolation of
/// the chroma differences R-G and B-G on their quarter lattices, added back
/// onto G. Assumes color-difference constancy across edges.
inline void demosaic_hybrid(const std::vector<double>& m, int h, int w, const CfaPattern& pat,
                            std::array<std::vector<double>, 3>& out) {
    std::vector<double> g(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (pat.color_at(y, x) == Channel::G) {
                g[i] = m[i];
            } else {
                g[i] = (fetch(m, h, w, y - 1, x) + fetch(m, h, w, y + 1, x) +
                        fetch(m, h, w, y, x - 1) + fetch(m, h, w, y, x + 1)) /
                       4.0;
            }
        }
    }
    const int lh = h / 2;
    const int lw = w / 2;
    for (Channel ch : {Channel::R, Channel::B}) {
        const CellOffset o = pat.offset_of(ch);
        std::vector<double> diff(static_cast<size_t>(lh) * lw);
        for (int i = 0; i < lh; ++i) {
            for (int j = 0; j < lw; ++j) {
                const size_t p = static_cast<size_t>(2 * i + o.row) * w + (2 * j + o.col);
                diff[static_cast<size_t>(i) * lw + j] = m[p] - g[p];
            }
        }
        auto& plane = out[static_cast<int>(ch)];
        for (int y = 0; y < h; ++y) {
            const double ly = (y - o.row) / 2.0;
            for (int x = 0; x < w; ++x) {
                const double lx = (x - o.col) / 2.0;
                const size_t i = static_cast<size_t>(y) * w + x;
                plane[i] = clamp01(g[i] + lattice_bilinear(diff, lh, lw, ly, lx));
            }
        }
    }
    out[1] = std::move(g);
}

}  // namespace detail

/// Interpolates the two missing color components at every site of a
/// normalized mosaic plane. Captured sites carry the input value exactly;
/// borders use edge replication. Nearest and bilinear are linear maps of the
/// input (fixed interpolation weights); hybrid is not (it clamps chroma).
inline std::array<std::vector<double>, 3> demosaic_real(const std::vector<double>& mosaic_plane,
                                                        int height, int width,
                                                        const CfaPattern& pattern,
                                                        DemosaicAlg alg) {
    if (height <= 0 || width <= 0 || height % 2 != 0 || width % 2 != 0)
        throw ValidationError("demosaic requires positive even dimensions");
    if (mosaic_plane.size() != static_cast<size_t>(height) * width)
        throw ValidationError("mosaic plane size mismatch");
    std::array<std::vector<double>, 3> out;
    for (auto& p : out) p.resize(mosaic_plane.size());
    switch (alg) {
        case DemosaicAlg::Nearest:
            detail::demosaic_nearest(mosaic_plane, height, width, pattern, out);
            break;
        case DemosaicAlg::Bilinear:
            detail::demosaic_bilinear(mosaic_plane, height, width, pattern, out);
            break;
        case DemosaicAlg::Hybrid:
            detail::demosaic_hybrid(mosaic_plane, height, width, pattern, out);
            break;
    }
    // captured sites must carry the input bit pattern, not a recomputed one
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const size_t i = static_cast<size_t>(y) * width + x;
            out[static_cast<int>(pattern.color_at(y, x))][i] = mosaic_plane[i];
        }
    }
    return out;
}

inline ColorImage demosaic(const BayerImage& bayer, DemosaicAlg alg) {
    const size_t n = bayer.samples().size();
    std::vector<double> norm(n);
    for (size_t i = 0; i < n; ++i) norm[i] = dequantize(bayer.samples()[i], bayer.bit_depth());
    auto planes = demosaic_real(norm, bayer.height(), bayer.width(), bayer.pattern(), alg);
    return ColorImage(bayer.height(), bayer.width(), std::move(planes), ColorState::SensorLinear);
}

/// Space-to-depth on the 2x2 CFA cell. Channels are emitted in normalized
/// (R, G1, G2, B) order for every layout; G1 is the green that shares a row
/// with R.
inline PackedBayer pack(const BayerImage& bayer) {
    const int hh = bayer.height() / 2;
    const int hw = bayer.width() / 2;
    const auto offs = bayer.pattern().normalized_offsets();
    std::array<std::vector<std::uint16_t>, 4> chans;
    for (int k = 0; k < 4; ++k) {
        chans[k].resize(static_cast<size_t>(hh) * hw);
        for (int i = 0; i < hh; ++i)
            for (int j = 0; j < hw; ++j)
                chans[k][static_cast<size_t>(i) * hw + j] =
                    bayer.at(2 * i + offs[k].row, 2 * j + offs[k].col);
    }
    return PackedBayer(hh, hw, bayer.bit_depth(), std::move(chans), bayer.pattern(),
                       bayer.black_level(), bayer.white_level());
}

inline BayerImage unpack(const PackedBayer& packed, const CfaPattern& pattern) {
    const int h = 2 * packed.half_height();
    const int w = 2 * packed.half_width();
    const auto offs = pattern.normalized_offsets();
    std::vector<std::uint16_t> samples(static_cast<size_t>(h) * w);
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < packed.half_height(); ++i)
            for (int j = 0; j < packed.half_width(); ++j)
                samples[static_cast<size_t>(2 * i + offs[k].row) * w + (2 * j + offs[k].col)] =
                    packed.at(k, i, j);
    return BayerImage(h, w, packed.bit_depth(), std::move(samples), pattern, packed.black_level(),
                      packed.white_level());
}

inline BayerImage unpack(const PackedBayer& packed) { return unpack(packed, packed.pattern()); }

/// Superpixel down-sampling: each output sample is the rounded mean of the
/// factor x factor same-color sites of its superpixel block. The CFA layout
/// is preserved.
inline BayerImage bayer_downsample(const BayerImage& bayer, int factor) {
    if (factor != 2 && factor != 4 && factor != 8)
        throw ValidationError("downsample factor must be 2, 4 or 8");
    if (bayer.height() % (2 * factor) != 0 || bayer.width() % (2 * factor) != 0)
        throw ValidationError("dimensions not divisible by 2*factor");
    const int oh = bayer.height() / factor;
    const int ow = bayer.width() / factor;
    const long n = static_cast<long>(factor) * factor;
    std::vector<std::uint16_t> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        const int r = y & 1;
        const int by = (y >> 1) * 2 * factor;
        for (int x = 0; x < ow; ++x) {
            const int s = x & 1;
            const int bx = (x >> 1) * 2 * factor;
            long sum = 0;
            for (int i = 0; i < factor; ++i)
                for (int j = 0; j < factor; ++j)
                    sum += bayer.at(by + 2 * i + r, bx + 2 * j + s);
            // round half away from zero; sums are nonnegative
            out[static_cast<size_t>(y) * ow + x] = static_cast<std::uint16_t>((sum + n / 2) / n);
        }
    }
    return BayerImage(oh, ow, bayer.bit_depth(), std::move(out), bayer.pattern(),
                      bayer.black_level(), bayer.white_level());
}

namespace detail {

struct Tap {
    int index;
    double weight;
};

inline std::vector<std::vector<Tap>> resize_taps(int src, int dst, ResizeFilter filter) {
    std::vector<std::vector<Tap>> taps(dst);
    if (filter == ResizeFilter::Box) {
        const double scale = static_cast<double>(src) / dst;
        for (int i = 0; i < dst; ++i) {
            const double a = i * scale;
            const double b = (i + 1) * scale;
            const int k0 = static_cast<int>(std::floor(a));
            const int k1 = std::min(static_cast<int>(std::ceil(b)), src);
            for (int k = k0; k < k1; ++k) {
                const double overlap = std::min(b, k + 1.0) - std::max(a, static_cast<double>(k));
                if (overlap > 0) taps[i].push_back({k, overlap / scale});
            }
        }
    } else {
        const double scale = static_cast<double>(src) / dst;
        for (int i = 0; i < dst; ++i) {
            const double s = (i + 0.5) * scale - 0.5;
            const double f = std::floor(s);
            const double t = s - f;
            const int k0 = std::clamp(static_cast<int>(f), 0, src - 1);
            const int k1 = std::clamp(static_cast<int>(f) + 1, 0, src - 1);
            if (k0 == k1) {
                taps[i].push_back({k0, 1.0});
            } else {
                taps[i].push_back({k0, 1.0 - t});
                taps[i].push_back({k1, t});
            }
        }
    }
    return taps;
}

inline std::vector<double> resize_plane(const std::vector<double>& src, int h, int w, int out_h,
                                        int out_w, ResizeFilter filter) {
    const auto row_taps = resize_taps(h, out_h, filter);
    const auto col_taps = resize_taps(w, out_w, filter);
    std::vector<double> tmp(static_cast<size_t>(out_h) * w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (const auto& tap : row_taps[static_cast<size_t>(y)])
                acc += tap.weight * src[static_cast<size_t>(tap.index) * w + x];
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            double acc = 0;
            for (const auto& tap : col_taps[static_cast<size_t>(x)])
                acc += tap.weight * tmp[static_cast<size_t>(y) * w + tap.index];
            out[static_cast<size_t>(y) * out_w + x] = acc;
        }
    return out;
}

}  // namespace detail

/// Separable per-plane resampling, clamped to [0,1]. Matching target
/// dimensions give the identity for both filters.
inline ColorImage resize_color(const ColorImage& color, int out_h, int out_w,
                               ResizeFilter filter) {
    if (out_h < 2 || out_w < 2 || out_h % 2 != 0 || out_w % 2 != 0)
        throw ValidationError("resize target dimensions must be even and >= 2");
    std::array<std::vector<double>, 3> out;
    for (int k = 0; k < 3; ++k) {
        out[k] = detail::resize_plane(color.planes()[k], color.height(), color.width(), out_h,
                                      out_w, filter);
        for (double& v : out[k]) v = clamp01(v);
    }
    return ColorImage(out_h, out_w, std::move(out), color.color_state());
}

/// CFA-preserving resampling to arbitrary even dimensions: each packed
/// quarter-resolution channel is resampled independently, so same-color
/// sites only ever mix with same-color sites.
inline BayerImage bayer_resize(const BayerImage& bayer, int out_h, int out_w,
                               ResizeFilter filter) {
    if (out_h < 4 || out_w < 4 || out_h % 2 != 0 || out_w % 2 != 0)
        throw ValidationError("Bayer resize target dimensions must be even and >= 4");
    const PackedBayer packed = pack(bayer);
    const int m = max_sample(bayer.bit_depth());
    std::array<std::vector<std::uint16_t>, 4> chans;
    for (int k = 0; k < 4; ++k) {
        std::vector<double> plane(packed.channel(k).begin(), packed.channel(k).end());
        std::vector<double> resized = detail::resize_plane(plane, packed.half_height(),
                                                           packed.half_width(), out_h / 2,
                                                           out_w / 2, filter);
        chans[k].resize(resized.size());
        for (size_t i = 0; i < resized.size(); ++i)
            chans[k][i] = static_cast<std::uint16_t>(
                std::clamp(round_half_away(resized[i]), 0LL, static_cast<long long>(m)));
    }
    return unpack(PackedBayer(out_h / 2, out_w / 2, bayer.bit_depth(), std::move(chans),
                              bayer.pattern(), bayer.black_level(), bayer.white_level()));
}

}  // namespace bayerisp
