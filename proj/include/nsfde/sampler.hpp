#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nsfde/ensemble.hpp"
#include "nsfde/segment.hpp"

namespace nsfde {

/// Reproducible random segments on a fixed grid.
///
/// Three shapes are mixed: constants (where the neutral contraction is tight),
/// random walks around a random level, and bumps localized at θ = -r0 or
/// θ = 0 (which stress lag and terminal dependence).
class RandomSegmentSampler {
public:
    RandomSegmentSampler(std::uint64_t seed, std::size_t intervals, std::size_t dim, double r0,
                         double amplitude = 1.0)
        : rng_(seed), intervals_(intervals), dim_(dim), r0_(r0), amplitude_(amplitude) {}

    std::size_t intervals() const { return intervals_; }
    std::size_t dim() const { return dim_; }
    double r0() const { return r0_; }
    std::mt19937_64& engine() { return rng_; }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t index(std::size_t count) {
        return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng_);
    }

    Segment segment() {
        std::vector<double> v((intervals_ + 1) * dim_);
        const int shape = static_cast<int>(index(4));
        for (std::size_t i = 0; i < dim_; ++i) {
            const double level = amplitude_ * normal();
            const double step = amplitude_ / std::sqrt(static_cast<double>(intervals_));
            double walk = level;
            for (std::size_t j = 0; j <= intervals_; ++j) {
                double x = level;
                if (shape == 1) {
                    x = walk;
                    walk += step * normal();
                } else if (shape == 2) {
                    x = level + (j == 0 ? amplitude_ * normal() : 0.0);
                } else if (shape == 3) {
                    x = level + (j == intervals_ ? amplitude_ * normal() : 0.0);
                }
                v[j * dim_ + i] = x;
            }
        }
        return Segment(intervals_, dim_, r0_, std::move(v));
    }

    Segment nonnegative() {
        auto s = segment();
        for (double& x : s.values()) x = std::abs(x);
        return s;
    }

    Ensemble ensemble(std::size_t count) {
        std::vector<Segment> m;
        m.reserve(count);
        for (std::size_t k = 0; k < count; ++k) m.push_back(segment());
        return Ensemble(std::move(m));
    }

private:
    std::mt19937_64 rng_;
    std::size_t intervals_;
    std::size_t dim_;
    double r0_;
    double amplitude_;
};

}  // namespace nsfde
