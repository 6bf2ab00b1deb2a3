#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsfde/neutral_term.hpp"
#include "nsfde/segment.hpp"

namespace nsfde {

enum class OrderRelation { Leq, Lt, Ll, LeqD, LtD };

/// Raised by the constructive lemmas when their hypotheses fail for the supplied D.
class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// a ≤_D b: a ≤ b pointwise and a(0) - D(a) ≤ b(0) - D(b) componentwise.
/// `tol` loosens both comparisons; the default is the exact relation.
inline bool leq_D(SegmentView a, SegmentView b, const NeutralTerm& d, double tol = 0.0) {
    require_same_grid(a, b);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k)
        if (av[k] > bv[k] + tol) return false;
    const auto da = d.d_coordinates(a);
    const auto db = d.d_coordinates(b);
    for (std::size_t i = 0; i < da.size(); ++i)
        if (da[i] > db[i] + tol) return false;
    return true;
}

/// a <_D b: a ≤_D b and a ≠ b.
inline bool lt_D(SegmentView a, SegmentView b, const NeutralTerm& d) {
    return leq_D(a, b, d) && lt(a, b);
}

inline bool related(OrderRelation rel, SegmentView a, SegmentView b, const NeutralTerm& d) {
    switch (rel) {
        case OrderRelation::Leq: return leq(a, b);
        case OrderRelation::Lt: return lt(a, b);
        case OrderRelation::Ll: return ll(a, b);
        case OrderRelation::LeqD: return leq_D(a, b, d);
        case OrderRelation::LtD: return lt_D(a, b, d);
    }
    return false;
}

/// h^i(r) = r - D^i(r·e), with e the all-ones segment on the grid of `like`.
inline double h_embed(const NeutralTerm& d, SegmentView like, std::size_t i, double r) {
    const auto e = Segment::constant(like.intervals(), like.dim(), like.r0(), r);
    return r - d.component(e, i);
}

struct BisectionOptions {
    double tol = 1e-12;
    int max_iter = 200;
};

namespace detail {

/// Root of a nonincreasing g on [lo, hi] with g(lo) ≥ target ≥ g(hi).
template <typename F>
double bisect_decreasing(F&& g, double lo, double hi, double target, const BisectionOptions& opt) {
    double best = lo;
    double best_res = std::abs(g(lo) - target);
    for (int it = 0; it < opt.max_iter && best_res > opt.tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        const double res = std::abs(gm - target);
        if (res < best_res) {
            best = mid;
            best_res = res;
        }
        if (gm > target) lo = mid;
        else hi = mid;
        if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
    }
    return best;
}

inline void require_contraction(const NeutralTerm& d) {
    if (!(d.kappa() > 0.0 && d.kappa() < 1.0))
        throw ConstructionError("neutral term must declare kappa in (0,1)");
}

}  // namespace detail

/// Returns a copy of `s` whose i-th terminal value is moved so that
/// s^i(0) - D^i(s) equals `target`. x ↦ x - D^i(s with terminal x) is
/// increasing with slope in [1-κ, 1+κ], so the root is bracketed in one step.
inline Segment match_d_coordinate(SegmentView s, const NeutralTerm& d, std::size_t i,
                                  double target, const BisectionOptions& opt = {}) {
    detail::require_contraction(d);
    Segment out(s);
    auto& row = out(out.intervals(), i);
    if (d.strictly_lagged()) {
        row = target + d.component(out, i);
        return out;
    }
    auto f = [&](double x) {
        row = x;
        return x - d.component(out, i);
    };
    const double x0 = s.terminal()[i];
    const double f0 = f(x0);
    const double x1 = x0 + (target - f0) / (1.0 - d.kappa());
    const double lo = std::min(x0, x1);
    const double hi = std::max(x0, x1);
    // g(x) = -f(x) is nonincreasing
    const double x = detail::bisect_decreasing([&](double v) { return -f(v); }, lo, hi, -target, opt);
    row = x;
    return out;
}

/// ζ ≤ ξ∧η with ζ^i(0) - D^i(ζ) = ξ^i(0) - D^i(ξ), given equal i-th D-coordinates.
///
/// ζ = ξ∧η - v·e where v ≥ 0 solves the D-coordinate equation directly; for
/// linear D this is the same v as h^i(v) = D^i(ξ) - D^i(ξ∧η).
inline Segment lower_companion(SegmentView xi, SegmentView eta, const NeutralTerm& d,
                               std::size_t i, const BisectionOptions& opt = {}) {
    require_same_grid(xi, eta);
    detail::require_contraction(d);
    if (i >= xi.dim()) throw std::out_of_range("component index out of range");

    const double c_xi = d.d_coordinate(xi, i);
    const double c_eta = d.d_coordinate(eta, i);
    const double scale = 1.0 + std::max(std::abs(c_xi), std::abs(c_eta));
    if (std::abs(c_xi - c_eta) > opt.tol * scale)
        throw ConstructionError("lower_companion: D-coordinates differ by " +
                                std::to_string(std::abs(c_xi - c_eta)));

    // WLOG ξ^i(0) ≤ η^i(0); the target is the D-coordinate of that one.
    const double target = xi.terminal()[i] <= eta.terminal()[i] ? c_xi : c_eta;
    Segment m = meet(xi, eta);
    const double g0 = d.d_coordinate(m, i);
    if (std::abs(g0 - target) <= opt.tol * scale) return m;
    if (g0 < target)
        throw ConstructionError("lower_companion: D is not monotone on this pair");

    Segment work = m;
    auto g = [&](double v) {
        auto w = work.values();
        const auto mv = m.values();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = mv[k] - v;
        return d.d_coordinate(work, i);
    };
    const double vmax = (g0 - target) / (1.0 - d.kappa());
    if (g(vmax) > target + opt.tol * scale)
        throw ConstructionError("lower_companion: bisection bracket failed (kappa understated?)");
    const double v = detail::bisect_decreasing(g, 0.0, vmax, target, opt);
    return shifted(m, -v);
}

/// α̃·e with α̃·e ≤_D ξ1 and α̃·e ≤_D ξ2.
inline Segment common_lower_constant(SegmentView xi1, SegmentView xi2, const NeutralTerm& d) {
    require_same_grid(xi1, xi2);
    detail::require_contraction(d);
    const Segment m = meet(xi1, xi2);
    double lowest = std::numeric_limits<double>::infinity();
    for (double v : m.values()) lowest = std::min(lowest, v);
    double alpha = -std::abs(lowest);

    const auto c1 = d.d_coordinates(xi1);
    const auto c2 = d.d_coordinates(xi2);
    for (std::size_t i = 0; i < c1.size(); ++i) {
        const double alpha_i = -std::abs(std::min(c1[i], c2[i])) / (1.0 - d.kappa());
        alpha = std::min(alpha, alpha_i);
    }

    // Rounding can leave the D-coordinate inequality one ulp short at equality.
    auto candidate = Segment::constant(xi1.intervals(), xi1.dim(), xi1.r0(), alpha);
    for (int nudge = 0; nudge < 64; ++nudge) {
        if (leq_D(candidate, xi1, d) && leq_D(candidate, xi2, d)) return candidate;
        alpha -= std::max(std::abs(alpha), 1.0) * std::ldexp(std::numeric_limits<double>::epsilon(), nudge);
        candidate = Segment::constant(xi1.intervals(), xi1.dim(), xi1.r0(), alpha);
    }
    throw ConstructionError("common_lower_constant: no lower bound found (D violates its contraction?)");
}

}  // namespace nsfde
