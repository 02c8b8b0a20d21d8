#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "weakmeas/vec3.hpp"

namespace weakmeas {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t stream_index) {
    return splitmix64(splitmix64(master_seed ^ (0x9E3779B97F4A7C15ULL * (stream_index + 1))) + stream_index);
}

/// Deterministic random stream addressed by (master_seed, stream_index).
///
/// The engine is std::mt19937_64 (fully specified by the standard) and all
/// distribution transforms below are written out explicitly, so identical
/// (master_seed, stream_index) pairs produce identical draw sequences on every
/// platform. Streams are never shared between trajectories; ensembles derive
/// one substream per trajectory index.
class RandomStream {
  public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
        : master_seed_(master_seed), stream_index_(stream_index), engine_(mix_seed(master_seed, stream_index)) {}

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

    /// Independent child stream; derivation depends only on the addresses.
    RandomStream substream(std::uint64_t i) const {
        return RandomStream(master_seed_, splitmix64(stream_index_ ^ (0xD1B54A32D192ED03ULL * (i + 1))));
    }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; never zero, safe under log.
    double uniform_open() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_open()));
        const double phi = 2.0 * std::numbers::pi * uniform01();
        cached_ = r * std::sin(phi);
        has_cached_ = true;
        return r * std::cos(phi);
    }

    /// Three iid normals scaled by `scale`.
    Vec3 normal3(double scale) { return {scale * normal(), scale * normal(), scale * normal()}; }

  private:
    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

/// Uniform point on the unit sphere. Used both for measurement directions and
/// for random pure states (uniform Bloch sphere).
inline Vec3 sample_uniform_sphere(RandomStream& rng) {
    const double z = 2.0 * rng.uniform01() - 1.0;
    const double phi = 2.0 * std::numbers::pi * rng.uniform01();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace weakmeas
