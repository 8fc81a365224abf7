// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0
//
// File containers: 16-bit binary PGM (P5) for Bayer mosaics with a JSON
// sidecar, binary PPM (P6) and PNG for color images. PGM/PPM are written
// byte-exactly by hand; PNG goes through libpng.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <png.h>

#include <nlohmann/json.hpp>

#include "bayerisp/image.hpp"

namespace bayerisp {

enum class ImageKind { Bayer, Color };
enum class ImageFormat { Pgm16, Ppm, Png, Png16 };

using AnyImage = std::variant<BayerImage, ColorImage>;

namespace detail {

inline int pnm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {  // comment runs to end of line
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c == '#') in.unget();
    return tok.empty() ? EOF : 0;
}

inline long pnm_read_int(std::istream& in, const char* what) {
    std::string tok;
    if (pnm_next_token(in, tok) == EOF) throw IoError(std::string("truncated header: ") + what);
    try {
        size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(std::string("malformed header field: ") + what + " = '" + tok + "'");
    }
}

struct PnmRaster {
    int height = 0;
    int width = 0;
    int maxval = 0;
    int channels = 0;
    std::vector<std::uint16_t> samples;  // interleaved for PPM
};

inline PnmRaster read_pnm(const std::filesystem::path& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != magic[0] || m1 != magic[1])
        throw IoError("malformed header: expected " + std::string(magic) + " in " + path.string());
    PnmRaster r;
    r.channels = channels;
    long w = pnm_read_int(in, "width");
    long h = pnm_read_int(in, "height");
    long maxval = pnm_read_int(in, "maxval");
    if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20)
        throw IoError("malformed header: bad dimensions in " + path.string());
    if (maxval <= 0 || maxval > 65535)
        throw IoError("malformed header: bad maxval in " + path.string());
    r.width = static_cast<int>(w);
    r.height = static_cast<int>(h);
    r.maxval = static_cast<int>(maxval);
    // the tokenizer consumed the single whitespace byte after maxval
    const size_t count = static_cast<size_t>(w) * h * channels;
    r.samples.resize(count);
    if (maxval < 256) {
        std::vector<unsigned char> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
        if (static_cast<size_t>(in.gcount()) != count)
            throw IoError("truncated raster in " + path.string());
        for (size_t i = 0; i < count; ++i) r.samples[i] = buf[i];
    } else {
        // two bytes per sample, most significant byte first
        std::vector<unsigned char> buf(count * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 2));
        if (static_cast<size_t>(in.gcount()) != count * 2)
            throw IoError("truncated raster in " + path.string());
        for (size_t i = 0; i < count; ++i)
            r.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    for (std::uint16_t s : r.samples) {
        if (s > r.maxval) throw IoError("sample exceeds maxval in " + path.string());
    }
    return r;
}

inline void write_pnm(const std::filesystem::path& path, const char* magic, int height,
                      int width, int maxval, const std::vector<std::uint16_t>& samples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << magic << "\n" << width << " " << height << "\n" << maxval << "\n";
    if (maxval < 256) {
        std::vector<unsigned char> buf(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) buf[i] = static_cast<unsigned char>(samples[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    } else {
        std::vector<unsigned char> buf(samples.size() * 2);
        for (size_t i = 0; i < samples.size(); ++i) {
            buf[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
            buf[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xff);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

struct PngCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    bool writing = false;
    ~PngCloser() {
        if (png) {
            if (writing)
                png_destroy_write_struct(&png, info ? &info : nullptr);
            else
                png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        }
        if (fp) std::fclose(fp);
    }
};

}  // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
    std::filesystem::path p = image_path;
    p.replace_extension(".json");
    return p;
}

inline void write_sidecar(const SidecarMeta& meta, const std::filesystem::path& path) {
    meta.validate();
    nlohmann::json j;
    j["pattern"] = meta.pattern;
    j["bit_depth"] = meta.bit_depth;
    if (meta.black_level) j["black_level"] = *meta.black_level;
    if (meta.white_level) j["white_level"] = *meta.white_level;
    if (!meta.provenance.empty()) j["provenance"] = meta.provenance;
    if (meta.packed) j["packed"] = true;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write sidecar " + path.string());
    out << j.dump(2) << "\n";
}

inline SidecarMeta read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sidecar " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed sidecar " + path.string() + ": " + e.what());
    }
    SidecarMeta meta;
    try {
        meta.pattern = j.at("pattern").get<std::string>();
        meta.bit_depth = j.at("bit_depth").get<int>();
        if (j.contains("black_level")) meta.black_level = j["black_level"].get<int>();
        if (j.contains("white_level")) meta.white_level = j["white_level"].get<int>();
        if (j.contains("provenance")) meta.provenance = j["provenance"].get<std::string>();
        if (j.contains("packed")) meta.packed = j["packed"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed sidecar " + path.string() + ": " + e.what());
    }
    meta.validate();
    return meta;
}

/// Read a Bayer mosaic from a 16-bit PGM plus its sidecar. When no sidecar
/// file exists, `defaults` supplies the metadata instead.
inline BayerImage read_bayer(const std::filesystem::path& path,
                             std::optional<SidecarMeta> defaults = std::nullopt) {
    SidecarMeta meta;
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        meta = read_sidecar(side);
    } else if (defaults) {
        meta = *defaults;
        meta.validate();
    } else {
        throw IoError("no sidecar for " + path.string() + " and no defaults supplied");
    }
    detail::PnmRaster r = detail::read_pnm(path, "P5", 1);
    if (r.maxval < max_sample(meta.bit_depth))
        throw IoError("maxval " + std::to_string(r.maxval) + " inconsistent with sidecar bit depth " +
                      std::to_string(meta.bit_depth) + " in " + path.string());
    if (r.height % 2 != 0 || r.width % 2 != 0)
        throw IoError("odd dimensions for Bayer image " + path.string());
    const int m = max_sample(meta.bit_depth);
    for (std::uint16_t s : r.samples) {
        if (s > m)
            throw IoError("sample exceeds sidecar bit depth in " + path.string());
    }
    return BayerImage(r.height, r.width, meta.bit_depth, std::move(r.samples),
                      pattern_of(meta.pattern), meta.black_level, meta.white_level);
}

/// Write a Bayer mosaic as 16-bit PGM (maxval 65535, samples unshifted) plus
/// a JSON sidecar with the same stem.
inline void write_bayer(const BayerImage& img, const std::filesystem::path& path,
                        const std::string& provenance = "") {
    detail::write_pnm(path, "P5", img.height(), img.width(), 65535, img.samples());
    SidecarMeta meta;
    meta.pattern = img.pattern().name();
    meta.bit_depth = img.bit_depth();
    meta.black_level = img.black_level();
    meta.white_level = img.white_level();
    meta.provenance = provenance;
    write_sidecar(meta, sidecar_path(path));
}

inline ColorImage read_ppm(const std::filesystem::path& path,
                           ColorState state = ColorState::DisplayReferred) {
    detail::PnmRaster r = detail::read_pnm(path, "P6", 3);
    const size_t n = static_cast<size_t>(r.height) * r.width;
    std::array<std::vector<double>, 3> planes{std::vector<double>(n), std::vector<double>(n),
                                              std::vector<double>(n)};
    for (size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k)
            planes[k][i] = static_cast<double>(r.samples[3 * i + k]) / r.maxval;
    }
    return ColorImage(r.height, r.width, std::move(planes), state);
}

inline void write_ppm(const ColorImage& img, const std::filesystem::path& path) {
    const size_t n = static_cast<size_t>(img.height()) * img.width();
    std::vector<std::uint16_t> inter(3 * n);
    for (size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k)
            inter[3 * i + k] = quantize(img.planes()[k][i], 8);
    }
    detail::write_pnm(path, "P6", img.height(), img.width(), 255, inter);
}

inline ColorImage read_png(const std::filesystem::path& path,
                           ColorState state = ColorState::DisplayReferred) {
    detail::PngCloser c;
    c.fp = std::fopen(path.string().c_str(), "rb");
    if (!c.fp) throw IoError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, c.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw IoError("not a PNG file: " + path.string());
    c.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!c.png) throw IoError("libpng init failed");
    c.info = png_create_info_struct(c.png);
    if (!c.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(c.png))) throw IoError("PNG decode error in " + path.string());
    png_init_io(c.png, c.fp);
    png_set_sig_bytes(c.png, 8);
    png_read_info(c.png, c.info);

    png_set_palette_to_rgb(c.png);
    png_set_expand_gray_1_2_4_to_8(c.png);
    png_set_gray_to_rgb(c.png);
    png_set_strip_alpha(c.png);
    if (png_get_valid(c.png, c.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(c.png);
    png_read_update_info(c.png, c.info);

    const int height = static_cast<int>(png_get_image_height(c.png, c.info));
    const int width = static_cast<int>(png_get_image_width(c.png, c.info));
    const int depth = png_get_bit_depth(c.png, c.info);
    const int chans = png_get_channels(c.png, c.info);
    if (chans < 3) throw IoError("unexpected PNG channel count in " + path.string());
    const size_t rowbytes = png_get_rowbytes(c.png, c.info);
    std::vector<unsigned char> raster(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = raster.data() + rowbytes * y;
    png_read_image(c.png, rows.data());
    png_read_end(c.png, nullptr);

    const size_t n = static_cast<size_t>(height) * width;
    std::array<std::vector<double>, 3> planes{std::vector<double>(n), std::vector<double>(n),
                                              std::vector<double>(n)};
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    for (int y = 0; y < height; ++y) {
        const unsigned char* row = rows[y];
        for (int x = 0; x < width; ++x) {
            for (int k = 0; k < 3; ++k) {
                size_t idx = static_cast<size_t>(x) * chans + k;
                double v;
                if (depth == 16) {
                    v = (row[2 * idx] << 8) | row[2 * idx + 1];  // PNG is big-endian
                } else {
                    v = row[idx];
                }
                planes[k][static_cast<size_t>(y) * width + x] = v / maxval;
            }
        }
    }
    return ColorImage(height, width, std::move(planes), state);
}

inline void write_png(const ColorImage& img, const std::filesystem::path& path,
                      int out_bit_depth = 8) {
    if (out_bit_depth != 8 && out_bit_depth != 16)
        throw ValidationError("PNG bit depth must be 8 or 16");
    detail::PngCloser c;
    c.writing = true;
    c.fp = std::fopen(path.string().c_str(), "wb");
    if (!c.fp) throw IoError("cannot write " + path.string());
    c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!c.png) throw IoError("libpng init failed");
    c.info = png_create_info_struct(c.png);
    if (!c.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(c.png))) throw IoError("PNG encode error for " + path.string());
    png_init_io(c.png, c.fp);
    png_set_IHDR(c.png, c.info, img.width(), img.height(), out_bit_depth, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(c.png, c.info);

    const int height = img.height();
    const int width = img.width();
    const size_t bytes_per_px = out_bit_depth == 16 ? 6 : 3;
    std::vector<unsigned char> row(bytes_per_px * width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int k = 0; k < 3; ++k) {
                double v = img.planes()[k][static_cast<size_t>(y) * width + x];
                if (out_bit_depth == 16) {
                    std::uint16_t q = quantize(v, 16);
                    row[6 * x + 2 * k] = static_cast<unsigned char>(q >> 8);
                    row[6 * x + 2 * k + 1] = static_cast<unsigned char>(q & 0xff);
                } else {
                    row[3 * x + k] = static_cast<unsigned char>(quantize(v, 8));
                }
            }
        }
        png_write_row(c.png, row.data());
    }
    png_write_end(c.png, nullptr);
}

/// A packed tensor is stored as a single 16-bit PGM with the four channel
/// planes [R, G1, G2, B] stacked vertically, plus a sidecar carrying the
/// source pattern and `"packed": true`.
inline void write_packed(const PackedBayer& packed, const std::filesystem::path& path) {
    std::vector<std::uint16_t> stacked;
    stacked.reserve(static_cast<size_t>(4) * packed.half_height() * packed.half_width());
    for (int k = 0; k < 4; ++k)
        stacked.insert(stacked.end(), packed.channel(k).begin(), packed.channel(k).end());
    detail::write_pnm(path, "P5", 4 * packed.half_height(), packed.half_width(), 65535, stacked);
    SidecarMeta meta;
    meta.pattern = packed.pattern().name();
    meta.bit_depth = packed.bit_depth();
    meta.black_level = packed.black_level();
    meta.white_level = packed.white_level();
    meta.packed = true;
    write_sidecar(meta, sidecar_path(path));
}

inline PackedBayer read_packed(const std::filesystem::path& path) {
    const auto side = sidecar_path(path);
    if (!std::filesystem::exists(side))
        throw IoError("no sidecar for packed tensor " + path.string());
    SidecarMeta meta = read_sidecar(side);
    if (!meta.packed)
        throw IoError("sidecar for " + path.string() + " does not mark a packed tensor");
    detail::PnmRaster r = detail::read_pnm(path, "P5", 1);
    if (r.height % 4 != 0)
        throw IoError("packed tensor height must be divisible by 4 in " + path.string());
    if (r.maxval < max_sample(meta.bit_depth))
        throw IoError("maxval inconsistent with sidecar bit depth in " + path.string());
    const int h = r.height / 4;
    const int w = r.width;
    const size_t plane = static_cast<size_t>(h) * w;
    const int m = max_sample(meta.bit_depth);
    std::array<std::vector<std::uint16_t>, 4> chans;
    for (int k = 0; k < 4; ++k) {
        chans[k].assign(r.samples.begin() + static_cast<std::ptrdiff_t>(k * plane),
                        r.samples.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane));
        for (std::uint16_t s : chans[k]) {
            if (s > m) throw IoError("sample exceeds sidecar bit depth in " + path.string());
        }
    }
    return PackedBayer(h, w, meta.bit_depth, std::move(chans), pattern_of(meta.pattern),
                       meta.black_level, meta.white_level);
}

inline ColorImage read_color(const std::filesystem::path& path,
                             ColorState state = ColorState::DisplayReferred) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == ".ppm") return read_ppm(path, state);
    if (ext == ".png") return read_png(path, state);
    if (ext == ".pgm") throw IoError("format/kind mismatch: PGM holds Bayer data, not color");
    throw IoError("unsupported color image extension: " + path.string());
}

inline AnyImage read_image(const std::filesystem::path& path, ImageKind kind,
                           std::optional<SidecarMeta> bayer_defaults = std::nullopt) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    if (kind == ImageKind::Bayer) return read_bayer(path, std::move(bayer_defaults));
    return read_color(path);
}

inline void write_image(const AnyImage& img, const std::filesystem::path& path,
                        ImageFormat format) {
    if (std::holds_alternative<BayerImage>(img)) {
        if (format != ImageFormat::Pgm16)
            throw ValidationError("format/kind mismatch: Bayer images are written as pgm16");
        write_bayer(std::get<BayerImage>(img), path);
        return;
    }
    const ColorImage& c = std::get<ColorImage>(img);
    switch (format) {
        case ImageFormat::Ppm: write_ppm(c, path); return;
        case ImageFormat::Png: write_png(c, path, 8); return;
        case ImageFormat::Png16: write_png(c, path, 16); return;
        case ImageFormat::Pgm16:
            throw ValidationError("format/kind mismatch: color images cannot be written as pgm16");
    }
}

}  // namespace bayerisp
