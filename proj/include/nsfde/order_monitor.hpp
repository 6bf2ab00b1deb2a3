#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsfde/coefficients.hpp"
#include "nsfde/segment_orders.hpp"
#include "nsfde/solver.hpp"

namespace nsfde {

inline constexpr std::size_t never = std::numeric_limits<std::size_t>::max();

inline void require_aligned(const PairedPaths& pp) {
    if (!pp.left || !pp.right) throw std::invalid_argument("paired paths are empty");
    const auto& a = *pp.left;
    const auto& b = *pp.right;
    if (a.size() != b.size() || a.dim() != b.dim() || a.steps() != b.steps() ||
        a.history_steps() != b.history_steps() || a.dt() != b.dt())
        throw GridMismatch("paired paths must share N, n and the time grid");
}

/// First grid steps at which the state order (ρ_i) and the D-coordinate
/// order (Υ_i) fail, per pair and component; `never` when they do not.
///
/// The state threshold is `slack`; the D-coordinate threshold is (1-κ)·slack.
/// With monotone D and contraction κ, a state gap g > slack at ρ forces a
/// D-coordinate gap ≥ (1-κ)g at the same step, so Υ ≤ ρ survives the slack.
struct CrossingReport {
    std::size_t pairs = 0, dim = 0;
    double dt = 0.0, slack = 0.0, d_slack = 0.0;
    std::vector<std::size_t> rho_steps, upsilon_steps;  ///< [pair*dim + i]

    std::size_t rho_step(std::size_t p, std::size_t i) const { return rho_steps[p * dim + i]; }
    std::size_t upsilon_step(std::size_t p, std::size_t i) const { return upsilon_steps[p * dim + i]; }

    std::size_t rho_step(std::size_t p) const { return min_over(rho_steps, p); }
    std::size_t upsilon_step(std::size_t p) const { return min_over(upsilon_steps, p); }

    double rho(std::size_t p, std::size_t i) const { return to_time(rho_step(p, i)); }
    double upsilon(std::size_t p, std::size_t i) const { return to_time(upsilon_step(p, i)); }
    double rho(std::size_t p) const { return to_time(rho_step(p)); }
    double upsilon(std::size_t p) const { return to_time(upsilon_step(p)); }

    bool any_upsilon() const {
        return std::any_of(upsilon_steps.begin(), upsilon_steps.end(), [](auto k) { return k != never; });
    }

private:
    std::size_t min_over(const std::vector<std::size_t>& v, std::size_t p) const {
        return *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(p * dim),
                                 v.begin() + static_cast<std::ptrdiff_t>((p + 1) * dim));
    }
    double to_time(std::size_t k) const {
        return k == never ? std::numeric_limits<double>::infinity() : dt * static_cast<double>(k);
    }
};

inline CrossingReport crossing_times(const PairedPaths& pp, const NeutralTerm& d, double slack) {
    require_aligned(pp);
    if (!(slack >= 0.0)) throw std::invalid_argument("slack must be nonnegative");
    const auto& a = *pp.left;
    const auto& b = *pp.right;
    CrossingReport rep;
    rep.pairs = a.size();
    rep.dim = a.dim();
    rep.dt = a.dt();
    rep.slack = slack;
    rep.d_slack = (1.0 - d.kappa()) * slack;
    rep.rho_steps.assign(rep.pairs * rep.dim, never);
    rep.upsilon_steps.assign(rep.pairs * rep.dim, never);
    std::vector<double> da(rep.dim), db(rep.dim);
    for (std::size_t p = 0; p < rep.pairs; ++p) {
        for (std::size_t k = 0; k <= a.steps(); ++k) {
            const auto sa = a.segment(p, k);
            const auto sb = b.segment(p, k);
            d.evaluate(sa, da);
            d.evaluate(sb, db);
            const auto xa = sa.terminal();
            const auto xb = sb.terminal();
            for (std::size_t i = 0; i < rep.dim; ++i) {
                auto& r = rep.rho_steps[p * rep.dim + i];
                auto& u = rep.upsilon_steps[p * rep.dim + i];
                if (r == never && xa[i] - xb[i] > slack) r = k;
                if (u == never && (xa[i] - da[i]) - (xb[i] - db[i]) > rep.d_slack) u = k;
            }
        }
    }
    return rep;
}

/// Pairs with Υ > ρ (each side minimized over components).
struct UpsilonCheck {
    bool passed = true;
    std::vector<std::size_t> violating_pairs;
};

inline UpsilonCheck check_upsilon_leq_rho(const CrossingReport& rep) {
    UpsilonCheck out;
    for (std::size_t p = 0; p < rep.pairs; ++p)
        if (rep.upsilon_step(p) > rep.rho_step(p)) out.violating_pairs.push_back(p);
    out.passed = out.violating_pairs.empty();
    return out;
}

/// Crossing CSV: pair,component,rho,upsilon (inf when never).
inline void write_crossings_csv(std::ostream& os, const CrossingReport& rep, int precision = 17) {
    csv::Writer w(os, precision);
    w.header({"pair", "component", "rho", "upsilon"});
    for (std::size_t p = 0; p < rep.pairs; ++p)
        for (std::size_t i = 0; i < rep.dim; ++i) w.row(p, i + 1, rep.rho(p, i), rep.upsilon(p, i));
}

struct HistogramBin {
    double lo, hi;
    std::size_t count;
};

struct OrderVerdict {
    bool applicable = true;  ///< false when the initial pairs are not ≤_D-ordered
    std::size_t pairs = 0;
    std::size_t violating_pairs = 0;
    double slack = 0.0;
    double max_violation = 0.0;  ///< largest state or D-coordinate excess over the run
    std::vector<std::size_t> first_violation_step;  ///< per pair, `never` when ordered
    std::vector<HistogramBin> histogram;

    double fraction() const { return pairs ? static_cast<double>(violating_pairs) / static_cast<double>(pairs) : 0.0; }
    bool preserved() const { return applicable && violating_pairs == 0; }
};

/// Segment order fails at step k exactly when some state gap on [t_k - r0, t_k]
/// or the D-coordinate gap at t_k is positive; since the initial segments are
/// checked separately, scanning states and D-coordinates on [0, T] suffices.
inline OrderVerdict order_report(const PairedPaths& pp, const NeutralTerm& d, double slack,
                                 std::size_t bins = 20) {
    require_aligned(pp);
    if (!(slack >= 0.0)) throw std::invalid_argument("slack must be nonnegative");
    if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
    const auto& a = *pp.left;
    const auto& b = *pp.right;
    const std::size_t n = a.dim();
    OrderVerdict v;
    v.pairs = a.size();
    v.slack = slack;
    v.first_violation_step.assign(v.pairs, never);
    std::vector<double> da(n), db(n);
    for (std::size_t p = 0; p < v.pairs; ++p) {
        if (!leq_D(a.segment(p, 0), b.segment(p, 0), d)) v.applicable = false;
        for (std::size_t k = 0; k <= a.steps(); ++k) {
            const auto sa = a.segment(p, k);
            const auto sb = b.segment(p, k);
            d.evaluate(sa, da);
            d.evaluate(sb, db);
            const auto xa = sa.terminal();
            const auto xb = sb.terminal();
            double excess = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                excess = std::max(excess, xa[i] - xb[i]);
                excess = std::max(excess, (xa[i] - da[i]) - (xb[i] - db[i]));
            }
            v.max_violation = std::max(v.max_violation, excess);
            if (excess > slack && v.first_violation_step[p] == never) v.first_violation_step[p] = k;
        }
        if (v.first_violation_step[p] != never) ++v.violating_pairs;
    }
    const double horizon = a.time(static_cast<std::ptrdiff_t>(a.steps()));
    const double width = horizon / static_cast<double>(bins);
    for (std::size_t j = 0; j < bins; ++j) v.histogram.push_back({width * j, width * (j + 1), 0});
    for (auto k : v.first_violation_step) {
        if (k == never) continue;
        const auto j = std::min(bins - 1, static_cast<std::size_t>(a.time(static_cast<std::ptrdiff_t>(k)) / width));
        ++v.histogram[j].count;
    }
    return v;
}

inline void write_verdict_csv(std::ostream& os, const OrderVerdict& v, const UpsilonCheck& u, int precision = 17) {
    csv::Writer w(os, precision);
    w.header({"applicable", "pairs", "violating_pairs", "fraction", "max_violation", "slack",
              "upsilon_leq_rho", "upsilon_rho_violations"});
    w.row(v.applicable ? 1 : 0, v.pairs, v.violating_pairs, v.fraction(), v.max_violation, v.slack,
          u.passed ? 1 : 0, u.violating_pairs.size());
}

inline void write_histogram_csv(std::ostream& os, const OrderVerdict& v, int precision = 17) {
    csv::Writer w(os, precision);
    w.header({"bin_start", "bin_end", "count"});
    for (const auto& bin : v.histogram) w.row(bin.lo, bin.hi, bin.count);
}

enum class Condition { Drift, Diffusion };

inline std::string condition_label(Condition c) {
    return c == Condition::Drift ? "drift condition (i) violated" : "diffusion condition (ii) violated";
}

struct Diagnosis {
    std::size_t pair, component, noise_index, step;
    double time;
    Condition condition;
    double left_value, right_value;
};

struct TouchEvent {
    std::size_t pair, step;
    std::vector<std::size_t> components;
    bool drift_flagged = false;
    bool diffusion_flagged = false;
};

struct Localization {
    std::vector<TouchEvent> events;
    std::vector<Diagnosis> diagnoses;

    std::size_t flagged(Condition c) const {
        return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [c](const TouchEvent& e) {
            return c == Condition::Drift ? e.drift_flagged : e.diffusion_flagged;
        }));
    }
    double flagged_fraction(Condition c) const {
        return events.empty() ? 0.0 : static_cast<double>(flagged(c)) / static_cast<double>(events.size());
    }
    bool clean() const { return diagnoses.empty(); }
};

/// Evaluates conditions (i) and (ii) at each pair's touch configuration: the
/// last grid step before Υ (the step at which the crossing components were
/// still D-ordered), restricted to the components i with Υ_i = Υ. Pairs
/// crossing at step 0 are evaluated at step 0. No finite Υ gives an empty result.
inline Localization localize_violation(const PairedPaths& pp, const CoefficientSet& cs,
                                       const CoefficientSet& cs_bar, const CrossingReport& rep,
                                       double tol = 1e-9) {
    require_aligned(pp);
    if (rep.pairs != pp.size()) throw std::invalid_argument("crossing report does not match the paths");
    const auto& a = *pp.left;
    const auto& b = *pp.right;
    const std::size_t n = a.dim();
    const std::size_t m = cs.noise_dim();
    if (cs_bar.noise_dim() != m) throw std::invalid_argument("systems differ in noise dimension");

    std::map<std::size_t, std::pair<Ensemble, Ensemble>> flows;
    auto flow_at = [&](std::size_t k) -> const std::pair<Ensemble, Ensemble>& {
        auto it = flows.find(k);
        if (it == flows.end()) it = flows.emplace(k, std::make_pair(pp.left_flow.at(k), pp.right_flow.at(k))).first;
        return it->second;
    };

    Localization out;
    std::vector<double> ba(n), bb(n), sa(n * m), sb(n * m);
    for (std::size_t p = 0; p < rep.pairs; ++p) {
        const std::size_t u = rep.upsilon_step(p);
        if (u == never) continue;
        TouchEvent ev{p, u == 0 ? 0 : u - 1, {}};
        for (std::size_t i = 0; i < n; ++i)
            if (rep.upsilon_step(p, i) == u) ev.components.push_back(i);
        const double t = a.time(static_cast<std::ptrdiff_t>(ev.step));
        const auto xa = a.segment(p, ev.step);
        const auto xb = b.segment(p, ev.step);
        const auto& [mu, nu] = flow_at(ev.step);
        cs.drift->evaluate(t, xa, mu, ba);
        cs_bar.drift->evaluate(t, xb, nu, bb);
        cs.diffusion->evaluate(t, xa, mu, sa);
        cs_bar.diffusion->evaluate(t, xb, nu, sb);
        for (std::size_t i : ev.components) {
            if (ba[i] > bb[i] + tol) {
                ev.drift_flagged = true;
                out.diagnoses.push_back({p, i, 0, ev.step, t, Condition::Drift, ba[i], bb[i]});
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (std::abs(sa[i * m + j] - sb[i * m + j]) > tol) {
                    ev.diffusion_flagged = true;
                    out.diagnoses.push_back({p, i, j, ev.step, t, Condition::Diffusion, sa[i * m + j], sb[i * m + j]});
                }
            }
        }
        out.events.push_back(std::move(ev));
    }
    return out;
}

/// Diagnosis CSV: pair,component,noise_index,step,t,condition,left,right (noise_index 0 for drift rows)
inline void write_diagnosis_csv(std::ostream& os, const Localization& loc, int precision = 17) {
    csv::Writer w(os, precision);
    w.header({"pair", "component", "noise_index", "step", "t", "condition", "left", "right"});
    for (const auto& d : loc.diagnoses)
        w.row(d.pair, d.component + 1, d.condition == Condition::Drift ? 0 : d.noise_index + 1, d.step, d.time,
              d.condition == Condition::Drift ? "(i)" : "(ii)", d.left_value, d.right_value);
}

struct ShiftRow {
    double eps;
    double distance;  ///< (1/N) Σ_p sup_{t ≤ T} |X̄^ε_p(t) - X̄_p(t)|
};

struct ShiftExperiment {
    std::vector<ShiftRow> rows;
    std::size_t iterations = 0;

    bool strictly_decreasing() const {
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (!(rows[k].distance < rows[k - 1].distance)) return false;
        return true;
    }
    bool nonincreasing(double tol) const {
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (rows[k].distance > rows[k - 1].distance + tol) return false;
        return true;
    }
};

/// Runs X̄ and every X̄^ε (drift b̄ + ε·(1,…,1)) from the same initial
/// ensemble with one NoisePlan and a common Picard iteration count.
inline ShiftExperiment epsilon_shift_experiment(const Ensemble& initial, const CoefficientSet& cs_bar,
                                                const std::vector<double>& eps_list, const SimGrid& grid,
                                                const NoisePlan& noise, const PicardOptions& opt = {}) {
    if (eps_list.empty()) throw std::invalid_argument("eps list is empty");
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        if (!(eps_list[k] >= 0.0)) throw std::invalid_argument("eps values must be nonnegative");
        if (k > 0 && eps_list[k] > eps_list[k - 1]) throw std::invalid_argument("eps list must be decreasing");
    }
    std::vector<CoefficientSet> shifted_sets;
    shifted_sets.reserve(eps_list.size());
    for (double e : eps_list) shifted_sets.push_back(cs_bar.with_drift(std::make_shared<ShiftedDrift>(cs_bar.drift, e)));
    std::vector<PicardSystem> systems{{&initial, &cs_bar}};
    for (const auto& s : shifted_sets) systems.push_back({&initial, &s});
    const auto res = picard_lockstep(systems, grid, noise, opt);

    ShiftExperiment out;
    out.iterations = res.front().diagnostics.iterations;
    const auto& base = *res.front().paths;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        const auto& x = *res[e + 1].paths;
        double total = 0.0;
        for (std::size_t p = 0; p < base.size(); ++p) {
            double sup = 0.0;
            for (std::size_t k = 0; k <= base.steps(); ++k) {
                const auto u = x.state(p, static_cast<std::ptrdiff_t>(k));
                const auto v = base.state(p, static_cast<std::ptrdiff_t>(k));
                double sq = 0.0;
                for (std::size_t i = 0; i < base.dim(); ++i) sq += (u[i] - v[i]) * (u[i] - v[i]);
                sup = std::max(sup, std::sqrt(sq));
            }
            total += sup;
        }
        out.rows.push_back({eps_list[e], total / static_cast<double>(base.size())});
    }
    return out;
}

inline void write_shift_csv(std::ostream& os, const ShiftExperiment& ex, int precision = 17) {
    csv::Writer w(os, precision);
    w.header({"eps", "distance"});
    for (const auto& r : ex.rows) w.row(r.eps, r.distance);
}

}  // namespace nsfde
