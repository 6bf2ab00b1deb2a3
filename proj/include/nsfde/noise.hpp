#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nsfde {

/// Brownian increments addressed by (particle, step, component).
///
/// Each normal is a pure function of the key and the seed, so a run can be
/// replayed bit-for-bit in any evaluation order. Two systems (or two Picard
/// iterates) that share a NoisePlan see identical increments.
class NoisePlan {
public:
    explicit NoisePlan(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Standard normal for the given key.
    double normal(std::uint64_t particle, std::uint64_t step, std::uint64_t component) const {
        std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
        h = mix(h ^ particle);
        h = mix(h ^ (step * 0x9e3779b97f4a7c15ULL));
        h = mix(h ^ (component + 0x3c6ef372fe94f82bULL));
        const std::uint64_t h2 = mix(h ^ 0xbb67ae8584caa73bULL);
        // u1 in (0, 1], u2 in [0, 1)
        const double u1 = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// ΔW for one step of length dt.
    double increment(std::uint64_t particle, std::uint64_t step, std::uint64_t component, double dt) const {
        return std::sqrt(dt) * normal(particle, step, component);
    }

    /// A plan whose keys never collide with this one's (used for initial-value sampling).
    NoisePlan derived(std::uint64_t stream) const { return NoisePlan(mix(seed_ + mix(stream + 1))); }

private:
    // SplitMix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
};

}  // namespace nsfde
