#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "nsfde/coefficients.hpp"
#include "nsfde/sampler.hpp"
#include "nsfde/segment_orders.hpp"
#include "nsfde/wasserstein.hpp"

namespace nsfde {

/// Outcome of a sampling-based falsifier. `passed` means no counterexample
/// was found in `samples` draws; it is not a proof.
struct CheckReport {
    std::string name;
    bool passed = true;
    double statistic = 0.0;  ///< max ratio, min margin, or max deviation, per check
    double threshold = 0.0;
    std::size_t samples = 0;
    std::size_t violations = 0;
    std::string note;
    std::vector<CheckReport> parts;

    void absorb(CheckReport part) {
        passed = passed && part.passed;
        violations += part.violations;
        samples += part.samples;
        parts.push_back(std::move(part));
    }

    /// Depth-first list of leaf reports, for tabular output.
    std::vector<const CheckReport*> leaves() const {
        std::vector<const CheckReport*> out;
        if (parts.empty()) {
            out.push_back(this);
            return out;
        }
        for (const auto& p : parts) {
            auto sub = p.leaves();
            out.insert(out.end(), sub.begin(), sub.end());
        }
        return out;
    }
};

struct CheckOptions {
    std::size_t trials = 1000;
    double t_max = 10.0;             ///< checker times are uniform on [0, t_max]
    std::size_t ensemble_size = 4;   ///< members per sampled measure
    double slack = 1e-12;
};

namespace detail {

inline double scale_of(std::span<const double> v) {
    double s = 1.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

/// A random pair direction constant in θ with entries ±1.
inline Segment sign_pattern(RandomSegmentSampler& s) {
    std::vector<double> v(s.dim());
    for (double& x : v) x = s.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    return Segment::constant(s.intervals(), s.r0(), v);
}

/// η with η ≤_D η̄ constructed from η by adding a nonnegative random segment
/// and, when `equal_component` is set, matching that D-coordinate exactly.
/// Returns false if the construction fails (for instance when D is not monotone).
inline bool ordered_partner(const Segment& eta, const NeutralTerm& d, RandomSegmentSampler& s,
                            std::optional<std::size_t> equal_component, Segment& out) {
    const double r = s.uniform(0.0, 1.0);
    Segment up = r < 0.2 ? shifted(eta, s.uniform(0.0, 1.0)) : added(eta, scaled(s.nonnegative(), s.uniform(0.0, 1.0)));
    const auto target = d.d_coordinates(eta);
    const BisectionOptions tight{1e-15, 200};
    for (int round = 0; round < 6; ++round) {
        if (equal_component) up = match_d_coordinate(up, d, *equal_component, target[*equal_component], tight);
        const auto cur = d.d_coordinates(up);
        bool fixed = true;
        for (std::size_t j = 0; j < cur.size(); ++j) {
            if (equal_component && j == *equal_component) continue;
            if (cur[j] < target[j]) {
                up = match_d_coordinate(up, d, j, target[j] + s.uniform(0.0, 0.5), tight);
                fixed = false;
            }
        }
        if (fixed && leq(eta, up)) {
            if (equal_component) {
                const double gap = std::abs(d.d_coordinate(up, *equal_component) - target[*equal_component]);
                if (gap > 1e-12 * (1.0 + std::abs(target[*equal_component]))) continue;
            }
            out = std::move(up);
            return leq_D(eta, out, d, 1e-12 * scale_of(target));
        }
    }
    return false;
}

/// ν with μ ≤_D ν: members shifted up by nonnegative constants (and
/// sometimes nonnegative bumps), then permuted. Validated by stochastic_leq_D.
inline Ensemble ordered_ensemble(const Ensemble& mu, const NeutralTerm& d, RandomSegmentSampler& s) {
    std::vector<Segment> up;
    up.reserve(mu.size());
    const double common = s.uniform(0.0, 2.0);
    for (const auto& m : mu) up.push_back(shifted(m, common * s.uniform(0.0, 1.0)));
    std::shuffle(up.begin(), up.end(), s.engine());
    Ensemble candidate(up);
    if (stochastic_leq_D(mu, candidate, d)) return candidate;
    std::vector<Segment> plain;
    for (const auto& m : mu) plain.push_back(shifted(m, common));
    return Ensemble(std::move(plain));
}

}  // namespace detail

/// D(0) = 0 and D monotone.
inline CheckReport check_A1(const NeutralTerm& d, RandomSegmentSampler& s, std::size_t trials) {
    CheckReport rep{"A1", true, 0.0, 1e-14, 0, 0, "statistic = |D(0)|", {}};
    const Segment zero(s.intervals(), s.dim(), s.r0());
    const auto d0 = d(zero);
    for (double v : d0) rep.statistic = std::max(rep.statistic, std::abs(v));
    if (rep.statistic > 1e-14) {
        rep.passed = false;
        rep.note += "; D(0) != 0";
    }
    for (std::size_t k = 0; k < trials; ++k) {
        const Segment lo = s.segment();
        const Segment hi = added(lo, s.nonnegative());
        const auto dl = d(lo);
        const auto dh = d(hi);
        ++rep.samples;
        const double tol = 1e-12 * detail::scale_of(dl);
        for (std::size_t i = 0; i < dl.size(); ++i)
            if (dh[i] < dl[i] - tol) {
                ++rep.violations;
                break;
            }
    }
    if (rep.violations > 0) rep.passed = false;
    return rep;
}

namespace detail {

template <typename Ratio>
CheckReport contraction_check(const char* name, const NeutralTerm& d, RandomSegmentSampler& s,
                              std::size_t trials, Ratio&& ratio) {
    CheckReport rep{name, true, 0.0, d.kappa() + 1e-12, 0, 0, "statistic = max ratio", {}};
    for (std::size_t k = 0; k < trials; ++k) {
        const Segment a = s.segment();
        Segment b;
        switch (k % 3) {
            case 0: b = s.segment(); break;
            case 1: b = added(a, scaled(sign_pattern(s), s.uniform(0.01, 2.0))); break;
            default: b = shifted(a, s.uniform(-2.0, 2.0)); break;
        }
        const double r = ratio(a, b);
        if (!std::isfinite(r)) continue;
        ++rep.samples;
        rep.statistic = std::max(rep.statistic, r);
        if (r > rep.threshold) ++rep.violations;
    }
    rep.passed = rep.violations == 0;
    return rep;
}

}  // namespace detail

/// max_i |D^i(ξ) - D^i(η)| ≤ κ max_i ‖ξ^i - η^i‖∞
inline CheckReport check_A5(const NeutralTerm& d, RandomSegmentSampler& s, std::size_t trials) {
    return detail::contraction_check("A5", d, s, trials, [&](const Segment& a, const Segment& b) {
        const double den = componentwise_sup_distance(a, b);
        if (den < 1e-12) return std::numeric_limits<double>::quiet_NaN();
        const auto da = d(a);
        const auto db = d(b);
        double num = 0.0;
        for (std::size_t i = 0; i < da.size(); ++i) num = std::max(num, std::abs(da[i] - db[i]));
        return num / den;
    });
}

/// |D(ξ) - D(η)| ≤ κ ‖ξ - η‖∞ with Euclidean norms on both sides.
inline CheckReport check_A5_prime(const NeutralTerm& d, RandomSegmentSampler& s, std::size_t trials) {
    return detail::contraction_check("A5'", d, s, trials, [&](const Segment& a, const Segment& b) {
        const double den = sup_distance(a, b);
        if (den < 1e-12) return std::numeric_limits<double>::quiet_NaN();
        const auto da = d(a);
        const auto db = d(b);
        double num = 0.0;
        for (std::size_t i = 0; i < da.size(); ++i) num += (da[i] - db[i]) * (da[i] - db[i]);
        return std::sqrt(num) / den;
    });
}

/// |b(ξ,μ)-b(η,ν)|² + |b̄(ξ,μ)-b̄(η,ν)|² ≤ L(‖ξ-η‖∞² + W2(μ,ν)²). `b_bar` may be null.
inline CheckReport check_lipschitz_A2(const Drift& b, const Drift* b_bar, double lipschitz,
                                      RandomSegmentSampler& s, const CheckOptions& opt = {}) {
    CheckReport rep{"A2", true, 0.0, lipschitz + opt.slack * std::max(1.0, lipschitz), 0, 0,
                    "statistic = max ratio", {}};
    for (std::size_t k = 0; k < opt.trials; ++k) {
        const double t = s.uniform(0.0, opt.t_max);
        const Segment xi = s.segment();
        const Segment eta = k % 2 == 0 ? s.segment() : shifted(xi, s.uniform(-2.0, 2.0));
        const Ensemble mu = s.ensemble(opt.ensemble_size);
        Ensemble nu = mu;
        if (k % 3 == 1) nu = s.ensemble(opt.ensemble_size);
        else if (k % 3 == 2) {
            std::vector<Segment> m;
            const double c = s.uniform(-1.0, 1.0);
            for (const auto& x : mu) m.push_back(shifted(x, c));
            nu = Ensemble(std::move(m));
        }
        const double dx = sup_distance(xi, eta);
        const double dm = w2(mu, nu);
        const double den = dx * dx + dm * dm;
        if (den < 1e-20) continue;
        auto sq_diff = [&](const Drift& f) {
            const auto u = f(t, xi, mu);
            const auto v = f(t, eta, nu);
            double acc = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) acc += (u[i] - v[i]) * (u[i] - v[i]);
            return acc;
        };
        double num = sq_diff(b);
        if (b_bar) num += sq_diff(*b_bar);
        const double r = num / den;
        ++rep.samples;
        rep.statistic = std::max(rep.statistic, r);
        if (r > rep.threshold) ++rep.violations;
    }
    rep.passed = rep.violations == 0;
    return rep;
}

/// Growth at the origin, sup over sampled t of |b(t,0,δ0)|² + |σ(t,0,δ0)|².
/// Informational: no pass/fail threshold exists for this quantity.
inline CheckReport record_A4(const CoefficientSet& cs, RandomSegmentSampler& s, const CheckOptions& opt = {}) {
    CheckReport rep{"A4", true, 0.0, std::numeric_limits<double>::infinity(), 0, 0,
                    "statistic = sup_t |b(t,0,delta0)|^2 + |sigma(t,0,delta0)|^2 (recorded only)", {}};
    const Segment zero(s.intervals(), s.dim(), s.r0());
    const Ensemble dirac = Ensemble::replicate(zero, 1);
    for (std::size_t k = 0; k < opt.trials; ++k) {
        const double t = s.uniform(0.0, opt.t_max);
        double acc = 0.0;
        for (double v : (*cs.drift)(t, zero, dirac)) acc += v * v;
        for (double v : (*cs.diffusion)(t, zero, dirac)) acc += v * v;
        rep.statistic = std::max(rep.statistic, acc);
        ++rep.samples;
    }
    return rep;
}

/// Two-part diffusion structure check for row i of σ:
///  (a) Σ_j |σ_ij(ξ,μ) - σ_ij(η,ν)|² ≤ L |i-th D-coordinate gap|²;
///  (b) σ_ij is unchanged when ξ and μ move with the i-th D-coordinate held fixed.
inline CheckReport check_A3_structure(const Diffusion& sigma, const NeutralTerm& d, double lipschitz,
                                      RandomSegmentSampler& s, const CheckOptions& opt = {}) {
    CheckReport rep{"A3", true, 0.0, 0.0, 0, 0, "", {}};
    CheckReport lip{"A3(a) d-coordinate Lipschitz", true, 0.0,
                    lipschitz + opt.slack * std::max(1.0, lipschitz), 0, 0, "statistic = max ratio", {}};
    CheckReport dep{"A3(b) depends only on t and d-coordinate", true, 0.0, 1e-12, 0, 0,
                    "statistic = max relative change of sigma_ij", {}};
    const std::size_t n = sigma.dim();
    const std::size_t m = sigma.noise_dim();
    const BisectionOptions tight{1e-15, 200};

    for (std::size_t k = 0; k < opt.trials; ++k) {
        const double t = s.uniform(0.0, opt.t_max);
        const Segment xi = s.segment();
        const Ensemble mu = s.ensemble(opt.ensemble_size);
        const Ensemble nu = s.ensemble(opt.ensemble_size);
        const auto sx = sigma(t, xi, mu);

        // (a)
        const Segment eta = k % 2 == 0 ? s.segment() : shifted(xi, s.uniform(-2.0, 2.0));
        const auto se = sigma(t, eta, nu);
        const auto cx = d.d_coordinates(xi);
        const auto ce = d.d_coordinates(eta);
        for (std::size_t i = 0; i < n; ++i) {
            const double gap = cx[i] - ce[i];
            double num = 0.0;
            for (std::size_t j = 0; j < m; ++j) num += (sx[i * m + j] - se[i * m + j]) * (sx[i * m + j] - se[i * m + j]);
            if (std::abs(gap) < 1e-9) continue;
            const double r = num / (gap * gap);
            ++lip.samples;
            lip.statistic = std::max(lip.statistic, r);
            if (r > lip.threshold) ++lip.violations;
        }

        // (b)
        for (std::size_t i = 0; i < n; ++i) {
            const Segment other = match_d_coordinate(s.segment(), d, i, cx[i], tight);
            std::vector<Segment> probes{other};
            try {
                probes.push_back(lower_companion(xi, other, d, i, tight));
            } catch (const ConstructionError&) {
                // D not monotone: (A1) reports that separately
            }
            for (const auto& p : probes) {
                const auto sp = sigma(t, p, nu);
                ++dep.samples;
                bool bad = false;
                for (std::size_t j = 0; j < m; ++j) {
                    const double a = sx[i * m + j];
                    const double b = sp[i * m + j];
                    const double change = std::abs(a - b) / std::max(1.0, std::abs(a));
                    dep.statistic = std::max(dep.statistic, change);
                    bad = bad || change > dep.threshold;
                }
                if (bad) ++dep.violations;
            }
        }
    }
    lip.passed = lip.violations == 0;
    dep.passed = dep.violations == 0;
    rep.absorb(std::move(lip));
    rep.absorb(std::move(dep));
    return rep;
}

/// Conditions of the comparison theorem for the pair (cs, cs_bar):
///  (i) b_i(t,η,μ) ≤ b̄_i(t,η̄,μ̄) whenever η ≤_D η̄, μ ≤_D μ̄ and the i-th
///      D-coordinates of η, η̄ agree;
///  (ii) σ = σ̄, with σ_ij a function of t and the i-th D-coordinate only.
/// Both systems must share the neutral term; that is checked as well.
inline CheckReport check_comparison_conditions(const CoefficientSet& cs, const CoefficientSet& cs_bar,
                                               RandomSegmentSampler& s, const CheckOptions& opt = {}) {
    if (cs.dim() != cs_bar.dim() || cs.noise_dim() != cs_bar.noise_dim())
        throw std::invalid_argument("comparison needs systems of equal dimensions");
    const auto& d = *cs.neutral;
    CheckReport rep{"comparison", true, 0.0, 0.0, 0, 0, "", {}};

    CheckReport same_d{"shared neutral term", true, 0.0, 1e-12, 0, 0, "statistic = max |D - D_bar|", {}};
    CheckReport drift{"(i) drift order", true, std::numeric_limits<double>::infinity(), 0.0, 0, 0,
                      "statistic = min over samples of b_bar_i - b_i", {}};
    CheckReport same_sigma{"(ii) sigma equals sigma_bar", true, 0.0, 1e-12, 0, 0,
                           "statistic = max relative |sigma - sigma_bar|", {}};
    std::size_t rejected = 0;

    for (std::size_t k = 0; k < opt.trials; ++k) {
        const double t = s.uniform(0.0, opt.t_max);
        const Segment eta = s.segment();
        const Ensemble mu = s.ensemble(opt.ensemble_size);
        const Ensemble mu_bar = detail::ordered_ensemble(mu, d, s);

        {
            const auto a = d(eta);
            const auto b = (*cs_bar.neutral)(eta);
            double dev = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a[i] - b[i]));
            ++same_d.samples;
            same_d.statistic = std::max(same_d.statistic, dev);
            if (dev > same_d.threshold * detail::scale_of(a)) ++same_d.violations;
        }

        for (std::size_t i = 0; i < cs.dim(); ++i) {
            Segment eta_bar;
            if (!detail::ordered_partner(eta, d, s, i, eta_bar)) {
                ++rejected;
                continue;
            }
            const auto lhs = (*cs.drift)(t, eta, mu);
            const auto rhs = (*cs_bar.drift)(t, eta_bar, mu_bar);
            const double margin = rhs[i] - lhs[i];
            ++drift.samples;
            drift.statistic = std::min(drift.statistic, margin);
            if (margin < -opt.slack * std::max({1.0, std::abs(lhs[i]), std::abs(rhs[i])})) ++drift.violations;
        }

        {
            const auto a = (*cs.diffusion)(t, eta, mu);
            const auto b = (*cs_bar.diffusion)(t, eta, mu);
            double dev = 0.0;
            for (std::size_t q = 0; q < a.size(); ++q)
                dev = std::max(dev, std::abs(a[q] - b[q]) / std::max(1.0, std::abs(a[q])));
            ++same_sigma.samples;
            same_sigma.statistic = std::max(same_sigma.statistic, dev);
            if (dev > same_sigma.threshold) ++same_sigma.violations;
        }
    }
    if (rejected > 0)
        drift.note += "; " + std::to_string(rejected) + " ordered-pair constructions rejected";
    same_d.passed = same_d.violations == 0;
    drift.passed = drift.violations == 0 && drift.samples > 0;
    same_sigma.passed = same_sigma.violations == 0;

    rep.absorb(std::move(same_d));
    rep.absorb(std::move(drift));
    rep.absorb(std::move(same_sigma));
    rep.absorb(check_A3_structure(*cs.diffusion, d, cs.declared.lipschitz, s, opt));
    return rep;
}

/// Every single-system assumption for one coefficient set.
inline CheckReport check_assumptions(const CoefficientSet& cs, RandomSegmentSampler& s,
                                     const CheckOptions& opt = {}) {
    CheckReport rep{"assumptions", true, 0.0, 0.0, 0, 0, "", {}};
    rep.absorb(check_A1(*cs.neutral, s, opt.trials));
    rep.absorb(check_A5(*cs.neutral, s, opt.trials));
    rep.absorb(check_A5_prime(*cs.neutral, s, opt.trials));
    rep.absorb(check_lipschitz_A2(*cs.drift, nullptr, cs.declared.lipschitz, s, opt));
    rep.absorb(check_A3_structure(*cs.diffusion, *cs.neutral, cs.declared.lipschitz, s, opt));
    rep.absorb(record_A4(cs, s, opt));
    return rep;
}

inline void write_report_csv(std::ostream& os, const CheckReport& rep, const std::string& system,
                             int precision = 17) {
    csv::Writer w(os, precision);
    for (const auto* leaf : rep.leaves())
        w.row(system, '"' + leaf->name + '"', leaf->passed ? "pass" : "fail", leaf->statistic,
              leaf->threshold, leaf->samples, leaf->violations);
}

}  // namespace nsfde
