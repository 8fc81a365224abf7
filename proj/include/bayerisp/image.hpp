// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "bayerisp/common.hpp"

namespace bayerisp {

enum class Channel : int { R = 0, G = 1, B = 2 };

enum class CfaLayout { RGGB, BGGR, GRBG, GBRG };

struct CellOffset {
    int row;
    int col;
};

/// 2x2 Bayer color filter array template. Each cell site carries exactly one
/// of R/G/B; the three binary templates partition the cell (two green sites,
/// one red, one blue).
class CfaPattern {
public:
    explicit CfaPattern(CfaLayout layout) : layout_(layout) {
        static constexpr Channel kCells[4][2][2] = {
            // RGGB
            {{Channel::R, Channel::G}, {Channel::G, Channel::B}},
            // BGGR
            {{Channel::B, Channel::G}, {Channel::G, Channel::R}},
            // GRBG
            {{Channel::G, Channel::R}, {Channel::B, Channel::G}},
            // GBRG
            {{Channel::G, Channel::B}, {Channel::R, Channel::G}},
        };
        const auto& cell = kCells[static_cast<int>(layout)];
        int count[3] = {0, 0, 0};
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                cell_[r][c] = cell[r][c];
                ++count[static_cast<int>(cell[r][c])];
            }
        }
        // Template partition: one red site, two green, one blue.
        if (count[0] != 1 || count[1] != 2 || count[2] != 1) {
            throw ValidationError("CFA templates do not partition the 2x2 cell");
        }
    }

    CfaLayout layout() const { return layout_; }

    /// Color captured at absolute pixel position (row, col).
    Channel color_at(int row, int col) const { return cell_[row & 1][col & 1]; }

    /// Binary template for one channel, P[r][c] == 1 where that channel is captured.
    std::array<std::array<int, 2>, 2> site_template(Channel k) const {
        std::array<std::array<int, 2>, 2> t{};
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) t[r][c] = (cell_[r][c] == k) ? 1 : 0;
        return t;
    }

    /// Cell offset of the red (resp. blue) site.
    CellOffset offset_of(Channel k) const {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                if (cell_[r][c] == k) return {r, c};
        return {0, 0};  // unreachable
    }

    /// Cell offsets in normalized (R, G1, G2, B) order. G1 is the green site
    /// sharing its row with red, G2 the one sharing its row with blue, so
    /// packed channels carry the same meaning for every layout.
    std::array<CellOffset, 4> normalized_offsets() const {
        CellOffset r = offset_of(Channel::R);
        CellOffset b = offset_of(Channel::B);
        CellOffset g1{}, g2{};
        for (int row = 0; row < 2; ++row) {
            for (int col = 0; col < 2; ++col) {
                if (cell_[row][col] != Channel::G) continue;
                if (row == r.row)
                    g1 = {row, col};
                else
                    g2 = {row, col};
            }
        }
        return {r, g1, g2, b};
    }

    std::string name() const {
        switch (layout_) {
            case CfaLayout::RGGB: return "RGGB";
            case CfaLayout::BGGR: return "BGGR";
            case CfaLayout::GRBG: return "GRBG";
            case CfaLayout::GBRG: return "GBRG";
        }
        return "RGGB";
    }

    bool operator==(const CfaPattern& o) const { return layout_ == o.layout_; }
    bool operator!=(const CfaPattern& o) const { return !(*this == o); }

private:
    CfaLayout layout_;
    Channel cell_[2][2];
};

/// Look up a CFA pattern by name (case-insensitive).
inline CfaPattern pattern_of(const std::string& name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (up == "RGGB") return CfaPattern(CfaLayout::RGGB);
    if (up == "BGGR") return CfaPattern(CfaLayout::BGGR);
    if (up == "GRBG") return CfaPattern(CfaLayout::GRBG);
    if (up == "GBRG") return CfaPattern(CfaLayout::GBRG);
    throw ValidationError("unknown CFA pattern: " + name);
}

/// Single-channel CFA mosaic. Even dimensions only (whole 2x2 cells), integer
/// samples in [0, 2^b - 1], optional black/white calibration levels.
class BayerImage {
public:
    BayerImage(int height, int width, int bit_depth, std::vector<std::uint16_t> samples,
               CfaPattern pattern, std::optional<int> black_level = std::nullopt,
               std::optional<int> white_level = std::nullopt)
        : height_(height),
          width_(width),
          bit_depth_(bit_depth),
          samples_(std::move(samples)),
          pattern_(pattern),
          black_level_(black_level),
          white_level_(white_level) {
        if (height <= 0 || width <= 0) throw ValidationError("non-positive dimensions");
        if (height % 2 != 0 || width % 2 != 0)
            throw ValidationError("Bayer dimensions must be even (whole CFA cells)");
        if (bit_depth < 8 || bit_depth > 16)
            throw ValidationError("bit depth must be in [8, 16]");
        if (samples_.size() != static_cast<size_t>(height) * width)
            throw ValidationError("sample buffer size does not match dimensions");
        const int m = max_sample(bit_depth);
        for (std::uint16_t s : samples_) {
            if (s > m) throw ValidationError("sample exceeds bit-depth maximum");
        }
        if (black_level_ || white_level_) {
            if (!black_level_ || !white_level_)
                throw ValidationError("black and white levels must be given together");
            if (*black_level_ < 0 || *black_level_ >= *white_level_ || *white_level_ > m)
                throw ValidationError("levels must satisfy 0 <= black < white <= 2^b-1");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int bit_depth() const { return bit_depth_; }
    const CfaPattern& pattern() const { return pattern_; }
    std::optional<int> black_level() const { return black_level_; }
    std::optional<int> white_level() const { return white_level_; }

    std::uint16_t at(int row, int col) const {
        return samples_[static_cast<size_t>(row) * width_ + col];
    }
    const std::vector<std::uint16_t>& samples() const { return samples_; }

    bool operator==(const BayerImage& o) const {
        return height_ == o.height_ && width_ == o.width_ && bit_depth_ == o.bit_depth_ &&
               pattern_ == o.pattern_ && black_level_ == o.black_level_ &&
               white_level_ == o.white_level_ && samples_ == o.samples_;
    }
    bool operator!=(const BayerImage& o) const { return !(*this == o); }

private:
    int height_;
    int width_;
    int bit_depth_;
    std::vector<std::uint16_t> samples_;
    CfaPattern pattern_;
    std::optional<int> black_level_;
    std::optional<int> white_level_;
};

enum class ColorState { SensorLinear, DisplayReferred };

/// Three-plane real-valued image, values in [0, 1]. The state tag records
/// whether intensities are sensor-linear or rendered for display.
class ColorImage {
public:
    ColorImage(int height, int width, std::array<std::vector<double>, 3> planes,
               ColorState state)
        : height_(height), width_(width), planes_(std::move(planes)), state_(state) {
        if (height <= 0 || width <= 0) throw ValidationError("non-positive dimensions");
        const size_t n = static_cast<size_t>(height) * width;
        for (auto& p : planes_) {
            if (p.size() != n) throw ValidationError("plane size does not match dimensions");
            for (double& v : p) {
                if (v < 0.0 || v > 1.0) {
                    if (v > -1e-12 && v < 1.0 + 1e-12) {
                        v = clamp01(v);  // snap arithmetic residue
                    } else {
                        throw ValidationError("color plane value outside [0, 1]");
                    }
                }
            }
        }
    }

    static ColorImage constant(int height, int width, double r, double g, double b,
                               ColorState state) {
        const size_t n = static_cast<size_t>(height) * width;
        return ColorImage(height, width,
                          {std::vector<double>(n, r), std::vector<double>(n, g),
                           std::vector<double>(n, b)},
                          state);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    ColorState color_state() const { return state_; }
    void set_color_state(ColorState s) { state_ = s; }

    const std::vector<double>& plane(Channel k) const {
        return planes_[static_cast<int>(k)];
    }
    const std::array<std::vector<double>, 3>& planes() const { return planes_; }

    double at(Channel k, int row, int col) const {
        return planes_[static_cast<int>(k)][static_cast<size_t>(row) * width_ + col];
    }

private:
    int height_;
    int width_;
    std::array<std::vector<double>, 3> planes_;
    ColorState state_;
};

/// Periodic-shuffle layout of a Bayer image: four quarter-resolution channels
/// in fixed (R, G1, G2, B) order.
class PackedBayer {
public:
    PackedBayer(int half_height, int half_width, int bit_depth,
                std::array<std::vector<std::uint16_t>, 4> channels, CfaPattern pattern,
                std::optional<int> black_level = std::nullopt,
                std::optional<int> white_level = std::nullopt)
        : half_height_(half_height),
          half_width_(half_width),
          bit_depth_(bit_depth),
          channels_(std::move(channels)),
          pattern_(pattern),
          black_level_(black_level),
          white_level_(white_level) {
        if (half_height <= 0 || half_width <= 0)
            throw ValidationError("non-positive packed dimensions");
        const size_t n = static_cast<size_t>(half_height) * half_width;
        for (const auto& ch : channels_) {
            if (ch.size() != n) throw ValidationError("packed channel size mismatch");
        }
    }

    int half_height() const { return half_height_; }
    int half_width() const { return half_width_; }
    int bit_depth() const { return bit_depth_; }
    const CfaPattern& pattern() const { return pattern_; }
    std::optional<int> black_level() const { return black_level_; }
    std::optional<int> white_level() const { return white_level_; }

    /// c indexes the normalized channel order: 0=R, 1=G1, 2=G2, 3=B.
    const std::vector<std::uint16_t>& channel(int c) const { return channels_[c]; }

    std::uint16_t at(int c, int row, int col) const {
        return channels_[c][static_cast<size_t>(row) * half_width_ + col];
    }

private:
    int half_height_;
    int half_width_;
    int bit_depth_;
    std::array<std::vector<std::uint16_t>, 4> channels_;
    CfaPattern pattern_;
    std::optional<int> black_level_;
    std::optional<int> white_level_;
};

/// Metadata stored next to a Bayer container file.
struct SidecarMeta {
    std::string pattern = "RGGB";
    int bit_depth = 8;
    std::optional<int> black_level;
    std::optional<int> white_level;
    std::string provenance;
    bool packed = false;

    void validate() const {
        CfaPattern p = pattern_of(pattern);  // throws on unknown name
        (void)p;
        if (bit_depth < 8 || bit_depth > 16)
            throw ValidationError("sidecar bit depth must be in [8, 16]");
        if (black_level || white_level) {
            if (!black_level || !white_level)
                throw ValidationError("sidecar levels must be given together");
            if (*black_level < 0 || *black_level >= *white_level ||
                *white_level > max_sample(bit_depth))
                throw ValidationError("sidecar levels inconsistent with bit depth");
        }
    }
};

}  // namespace bayerisp
