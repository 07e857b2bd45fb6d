#pragma once

#include <cmath>
#include <cstdint>

#include "rubble/math.hpp"

namespace rubble {

/// Hash-based lattice value noise in [0, 1], trilinear with smooth fade.
/// `salt` selects an independent field.
inline double value_noise(const Vec3& p, std::uint32_t salt = 0) {
    auto lattice = [salt](std::int64_t x, std::int64_t y, std::int64_t z) {
        std::uint64_t h = static_cast<std::uint64_t>(x) * 0x8da6b343ULL ^ static_cast<std::uint64_t>(y) * 0xd8163841ULL ^
                          static_cast<std::uint64_t>(z) * 0xcb1ab31fULL ^ (static_cast<std::uint64_t>(salt) << 32);
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        h *= 0xc4ceb9fe1a85ec53ULL;
        h ^= h >> 33;
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy), iz = static_cast<std::int64_t>(fz);
    auto fade = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double tx = fade(p.x() - fx), ty = fade(p.y() - fy), tz = fade(p.z() - fz);
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    const double c00 = lerp(lattice(ix, iy, iz), lattice(ix + 1, iy, iz), tx);
    const double c10 = lerp(lattice(ix, iy + 1, iz), lattice(ix + 1, iy + 1, iz), tx);
    const double c01 = lerp(lattice(ix, iy, iz + 1), lattice(ix + 1, iy, iz + 1), tx);
    const double c11 = lerp(lattice(ix, iy + 1, iz + 1), lattice(ix + 1, iy + 1, iz + 1), tx);
    return lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
}

/// Two-octave value noise, still in [0, 1].
inline double fractal_noise(const Vec3& p, std::uint32_t salt = 0) {
    return (2.0 * value_noise(p, salt) + value_noise(2.03 * p, salt + 1)) / 3.0;
}

}  // namespace rubble
