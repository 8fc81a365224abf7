// Copyright Contributors to the bayerisp project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace bayerisp {

inline constexpr const char* kToolVersion = "0.1.0";

/// Decode/encode or filesystem failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated type invariant, schema, or pipeline contract.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double clamp01(double v) {
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

/// Round half away from zero. All image quantities are nonnegative here,
/// but keep the symmetric rule for negative intermediates (noise).
inline long long round_half_away(double v) {
    return static_cast<long long>(v < 0.0 ? std::ceil(v - 0.5) : std::floor(v + 0.5));
}

inline int max_sample(int bit_depth) {
    return (1 << bit_depth) - 1;
}

/// Quantize a normalized intensity to a b-bit integer sample.
inline std::uint16_t quantize(double v, int bit_depth) {
    const int m = max_sample(bit_depth);
    long long q = round_half_away(clamp01(v) * m);
    if (q < 0) q = 0;
    if (q > m) q = m;
    return static_cast<std::uint16_t>(q);
}

inline double dequantize(std::uint16_t s, int bit_depth) {
    return static_cast<double>(s) / max_sample(bit_depth);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for one file of a batch: decorrelated per path, stable across runs
/// and across worker counts.
inline std::uint64_t per_file_seed(std::uint64_t global_seed, const std::string& rel_path) {
    return splitmix64(global_seed ^ fnv1a64(rel_path));
}

/// Standard-normal generator with an explicit Box-Muller transform so the
/// byte stream is a pure function of the seed, independent of the standard
/// library's distribution internals.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double z0 = r * std::cos(2.0 * M_PI * u2);
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return z0;
    }

private:
    double uniform01() {
        // in (0, 1]: avoids log(0)
        return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Little-endian scalar I/O for the binary feature formats, independent of
// host byte order.

inline void write_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw IoError("truncated binary header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64le(std::ostream& out, double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw IoError("truncated binary payload");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

}  // namespace bayerisp
