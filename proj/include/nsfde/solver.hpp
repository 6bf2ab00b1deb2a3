#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "nsfde/coefficients.hpp"
#include "nsfde/ensemble.hpp"
#include "nsfde/noise.hpp"
#include "nsfde/segment_orders.hpp"

namespace nsfde {

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform time grid whose spacing equals the segment spacing, so the segment
/// at step k+1 is the segment at step k shifted by one row.
struct SimGrid {
    double dt = 0.01;
    std::size_t steps = 100;
    std::size_t history_steps = 50;  ///< K, with r0 = K·dt
    double t0_window = 0.0;          ///< contraction window for Picard diagnostics; 0 selects it

    double r0() const { return dt * static_cast<double>(history_steps); }
    double horizon() const { return dt * static_cast<double>(steps); }
    double time(std::size_t k) const { return dt * static_cast<double>(k); }

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("grid.dt must be positive");
        if (steps < 1) throw std::invalid_argument("grid.steps must be >= 1");
        if (history_steps < 1) throw std::invalid_argument("grid.K must be >= 1");
        if (t0_window < 0.0) throw std::invalid_argument("t0 window must be nonnegative");
    }
};

/// N trajectories on times -r0, …, 0, …, T. Row p of a particle holds time (p - K)·dt.
class PathSet {
public:
    PathSet(std::size_t particles, std::size_t dim, std::size_t history_steps, std::size_t steps, double dt)
        : particles_(particles), dim_(dim), history_(history_steps), steps_(steps), dt_(dt),
          data_(particles * (history_steps + steps + 1) * dim, 0.0) {}

    std::size_t size() const { return particles_; }
    std::size_t dim() const { return dim_; }
    std::size_t history_steps() const { return history_; }
    std::size_t steps() const { return steps_; }
    double dt() const { return dt_; }
    double time(std::ptrdiff_t k) const { return dt_ * static_cast<double>(k); }

    /// X(t_k), k ∈ [-K, steps]
    std::span<const double> state(std::size_t i, std::ptrdiff_t k) const {
        return std::span<const double>(data_).subspan(offset(i, k), dim_);
    }
    std::span<double> state(std::size_t i, std::ptrdiff_t k) {
        return std::span<double>(data_).subspan(offset(i, k), dim_);
    }

    /// X_{t_k} as a segment on [-r0, 0], k ∈ [0, steps]. Pure index arithmetic.
    SegmentView segment(std::size_t i, std::size_t k) const {
        return {std::span<const double>(data_).subspan(offset(i, static_cast<std::ptrdiff_t>(k) -
                                                                   static_cast<std::ptrdiff_t>(history_)),
                                                       (history_ + 1) * dim_),
                dim_, dt_};
    }

    /// Rows k-K … k+1 of particle i: the segment at k plus the slot for step k+1.
    std::span<double> step_window(std::size_t i, std::size_t k) {
        return std::span<double>(data_).subspan(
            offset(i, static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(history_)),
            (history_ + 2) * dim_);
    }

    Ensemble ensemble_at(std::size_t k) const {
        std::vector<Segment> m;
        m.reserve(particles_);
        for (std::size_t i = 0; i < particles_; ++i) m.emplace_back(segment(i, k));
        return Ensemble(std::move(m));
    }

    std::span<const double> raw() const { return data_; }

    friend bool operator==(const PathSet& a, const PathSet& b) {
        return a.particles_ == b.particles_ && a.dim_ == b.dim_ && a.history_ == b.history_ &&
               a.steps_ == b.steps_ && a.dt_ == b.dt_ && a.data_ == b.data_;
    }

private:
    std::size_t offset(std::size_t i, std::ptrdiff_t k) const {
        const auto p = static_cast<std::size_t>(k + static_cast<std::ptrdiff_t>(history_));
        return (i * (history_ + steps_ + 1) + p) * dim_;
    }

    std::size_t particles_, dim_, history_, steps_;
    double dt_;
    std::vector<double> data_;
};

/// Paths CSV, long format: particle,t,x1,…,xn (history rows have t < 0).
inline void write_paths_csv(std::ostream& os, const PathSet& p, int precision = 17) {
    csv::Writer w(os, precision);
    auto names = state_column_names(p.dim());
    names.insert(names.begin(), {"particle", "t"});
    w.header(names);
    const auto k_lo = -static_cast<std::ptrdiff_t>(p.history_steps());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (auto k = k_lo; k <= static_cast<std::ptrdiff_t>(p.steps()); ++k)
            w.row_with(p.state(i, k), i, p.time(k));
}

/// The time-indexed laws μ_t fed to a frozen solve: either one ensemble for
/// all t (the Picard start) or the segments of a previous PathSet.
class MeasureFlow {
public:
    static MeasureFlow frozen(Ensemble mu) {
        MeasureFlow f;
        f.frozen_ = std::make_shared<const Ensemble>(std::move(mu));
        return f;
    }

    static MeasureFlow from_paths(std::shared_ptr<const PathSet> paths) {
        MeasureFlow f;
        f.paths_ = std::move(paths);
        return f;
    }

    std::size_t size() const { return frozen_ ? frozen_->size() : paths_->size(); }
    bool is_frozen() const { return frozen_ != nullptr; }
    const PathSet* paths() const { return paths_.get(); }

    Ensemble at(std::size_t k) const { return frozen_ ? *frozen_ : paths_->ensemble_at(k); }

private:
    std::shared_ptr<const Ensemble> frozen_;
    std::shared_ptr<const PathSet> paths_;
};

/// Flow summary CSV: t,mean_1..mean_n,second_moment for t in [0, T].
inline void write_flow_summary_csv(std::ostream& os, const PathSet& p, int precision = 17) {
    csv::Writer w(os, precision);
    std::vector<std::string> names{"t"};
    for (std::size_t i = 1; i <= p.dim(); ++i) names.push_back("mean_" + std::to_string(i));
    names.push_back("second_moment");
    w.header(names);
    for (std::size_t k = 0; k <= p.steps(); ++k) {
        std::vector<double> mean(p.dim(), 0.0);
        double m2 = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto x = p.state(i, static_cast<std::ptrdiff_t>(k));
            for (std::size_t c = 0; c < p.dim(); ++c) mean[c] += x[c];
            const double s = sup_norm(p.segment(i, k));
            m2 += s * s;
        }
        for (double& v : mean) v /= static_cast<double>(p.size());
        std::vector<double> tail = mean;
        tail.push_back(m2 / static_cast<double>(p.size()));
        w.row_with(tail, p.time(static_cast<std::ptrdiff_t>(k)));
    }
}

struct StepOptions {
    double fp_tol = 1e-14;
    int fp_max_iter = 200;
};

namespace detail {

struct StepScratch {
    std::vector<double> d_now, d_next, drift, sigma, y;
};

/// One Euler–Maruyama step on the D-coordinate followed by terminal-value
/// recovery. `window` holds K+2 rows: the current segment (rows 0..K) and
/// the slot for the next state (row K+1), which is overwritten.
inline void advance(std::span<double> window, std::size_t n, double dtheta, double t, const Ensemble& mu,
                    const CoefficientSet& cs, std::span<const double> dw, double dt,
                    const StepOptions& opt, StepScratch& s) {
    const std::size_t rows = window.size() / n;
    const SegmentView cur(window.first((rows - 1) * n), n, dtheta);
    const SegmentView next(window.subspan(n), n, dtheta);
    const std::size_t m = cs.noise_dim();

    s.d_now.resize(n);
    s.d_next.resize(n);
    s.drift.resize(n);
    s.sigma.resize(n * m);
    s.y.resize(n);

    cs.neutral->evaluate(cur, s.d_now);
    cs.drift->evaluate(t, cur, mu, s.drift);
    cs.diffusion->evaluate(t, cur, mu, s.sigma);
    const auto x_now = cur.terminal();
    for (std::size_t i = 0; i < n; ++i) {
        double v = x_now[i] - s.d_now[i] + s.drift[i] * dt;
        for (std::size_t j = 0; j < m; ++j) v += s.sigma[i * m + j] * dw[j];
        s.y[i] = v;
    }

    auto slot = window.last(n);
    std::copy(x_now.begin(), x_now.end(), slot.begin());
    if (cs.neutral->strictly_lagged()) {
        cs.neutral->evaluate(next, s.d_next);
        for (std::size_t i = 0; i < n; ++i) slot[i] = s.y[i] + s.d_next[i];
        return;
    }
    for (int it = 0; it < opt.fp_max_iter; ++it) {
        cs.neutral->evaluate(next, s.d_next);
        double change = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = s.y[i] + s.d_next[i];
            change = std::max(change, std::abs(x - slot[i]));
            scale = std::max(scale, std::abs(x));
            slot[i] = x;
        }
        if (!std::isfinite(scale)) break;
        if (change <= opt.fp_tol * scale) return;
    }
    throw ConvergenceError("neutral fixed point did not converge in " + std::to_string(opt.fp_max_iter) +
                           " iterations (kappa >= 1?)");
}

}  // namespace detail

/// X(t+dt) from the segment X_t: Y = X(t) - D(X_t) + b·dt + σ·ΔW, then
/// x = Y + D(X_t shifted one step with terminal value x).
inline std::vector<double> euler_step(SegmentView x_seg, double t, const Ensemble& mu_t,
                                      const CoefficientSet& cs, std::span<const double> dw, double dt,
                                      const StepOptions& opt = {}) {
    if (std::abs(x_seg.dtheta() - dt) > 1e-12 * dt)
        throw std::invalid_argument("euler_step needs segment spacing equal to dt");
    if (dw.size() != cs.noise_dim()) throw std::invalid_argument("dW has wrong length");
    const std::size_t n = x_seg.dim();
    std::vector<double> window(x_seg.values().begin(), x_seg.values().end());
    window.resize(window.size() + n);
    detail::StepScratch scratch;
    detail::advance(window, n, dt, t, mu_t, cs, dw, dt, opt, scratch);
    return {window.end() - static_cast<std::ptrdiff_t>(n), window.end()};
}

namespace detail {

inline void require_initial(const Ensemble& initial, const CoefficientSet& cs, const SimGrid& grid) {
    cs.validate();
    grid.validate();
    if (initial.dim() != cs.dim())
        throw std::invalid_argument("initial ensemble has n=" + std::to_string(initial.dim()) +
                                    " but coefficients have n=" + std::to_string(cs.dim()));
    if (initial.intervals() != grid.history_steps ||
        std::abs(initial.r0() - grid.r0()) > 1e-9 * grid.r0())
        throw GridMismatch("initial segments must have K = grid.K and r0 = K*dt");
}

inline PathSet seeded_paths(const Ensemble& initial, const SimGrid& grid) {
    PathSet p(initial.size(), initial.dim(), grid.history_steps, grid.steps, grid.dt);
    const auto k_lo = -static_cast<std::ptrdiff_t>(grid.history_steps);
    for (std::size_t i = 0; i < initial.size(); ++i)
        for (std::size_t j = 0; j <= grid.history_steps; ++j) {
            const auto src = initial[i].row(j);
            std::copy(src.begin(), src.end(), p.state(i, k_lo + static_cast<std::ptrdiff_t>(j)).begin());
        }
    return p;
}

}  // namespace detail

/// Solve the classical neutral SFDE with the measure argument frozen to `flow`.
/// Particle i uses increments noise(i, k, ·); results do not depend on order.
inline PathSet solve_frozen(const Ensemble& initial, const MeasureFlow& flow, const CoefficientSet& cs,
                            const NoisePlan& noise, const SimGrid& grid, const StepOptions& opt = {}) {
    detail::require_initial(initial, cs, grid);
    if (flow.size() != initial.size())
        throw std::invalid_argument("measure flow and initial ensemble differ in size");
    if (const auto* fp = flow.paths(); fp && fp->steps() < grid.steps)
        throw std::invalid_argument("measure flow does not cover [0, T]");

    PathSet paths = detail::seeded_paths(initial, grid);
    const std::size_t n = cs.dim();
    const std::size_t m = cs.noise_dim();
    std::vector<double> dw(m);
    detail::StepScratch scratch;
    for (std::size_t k = 0; k < grid.steps; ++k) {
        const Ensemble mu = flow.at(k);
        const double t = grid.time(k);
        for (std::size_t i = 0; i < initial.size(); ++i) {
            for (std::size_t j = 0; j < m; ++j) dw[j] = noise.increment(i, k, j, grid.dt);
            detail::advance(paths.step_window(i, k), n, grid.dt, t, mu, cs, dw, grid.dt, opt, scratch);
        }
    }
    return paths;
}

struct PicardOptions {
    double tol = 1e-20;        ///< on sup_t (1/N)Σ|X^(n)(t) - X^(n-1)(t)|²
    std::size_t max_iter = 50;
    StepOptions step{};
    /// ratios d_n/d_{n-1}, n in [ratio_from, ratio_to], must stay at or below this on [0, t0]
    double window_ratio = 1.0 / std::numbers::e;
    std::size_t ratio_from = 2;
    std::size_t ratio_to = 5;
    double ratio_floor = 1e-28;  ///< d_{n-1} below this is treated as converged
};

struct PicardDiagnostics {
    std::size_t iterations = 0;
    bool converged = false;
    double final_distance = std::numeric_limits<double>::infinity();
    /// stop_metric[n-1] = sup_t mean_i |X^(n) - X^(n-1)|²
    std::vector<double> stop_metric;
    /// profiles[n][k] = mean_i sup_{t ≤ t_k} |X^(n+1) - X^(n)|², X^(0)(t) = ξ(0)
    std::vector<std::vector<double>> profiles;
    std::size_t t0_steps = 0;
    double t0 = 0.0;
    /// d[n] = profiles[n][t0_steps]; ratio[n] = d[n]/d[n-1] (NaN for n = 0 or d[n-1] = 0)
    std::vector<double> d;
    std::vector<double> ratio;
};

/// Picard diagnostics CSV: n,d_n,ratio
inline void write_diagnostics_csv(std::ostream& os, const PicardDiagnostics& diag, int precision = 17) {
    csv::Writer w(os, precision);
    w.header({"n", "d_n", "ratio"});
    for (std::size_t k = 0; k < diag.d.size(); ++k) w.row(k, diag.d[k], diag.ratio[k]);
}

/// Largest window [0, t_k] on which every ratio d_n/d_{n-1}, n in the
/// configured range, is at most `window_ratio`.
inline std::size_t select_contraction_window(const std::vector<std::vector<double>>& profiles,
                                             const PicardOptions& opt) {
    if (profiles.empty()) return 1;
    const std::size_t last = profiles.front().size() - 1;
    for (std::size_t k = last; k >= 1; --k) {
        bool ok = true;
        for (std::size_t n = opt.ratio_from; n <= opt.ratio_to && n < profiles.size() && ok; ++n) {
            const double prev = profiles[n - 1][k];
            if (prev <= opt.ratio_floor) continue;
            ok = profiles[n][k] / prev <= opt.window_ratio;
        }
        if (ok) return k;
    }
    return 1;
}

inline void finalize_diagnostics(PicardDiagnostics& diag, const SimGrid& grid, const PicardOptions& opt) {
    if (diag.profiles.empty()) return;
    if (grid.t0_window > 0.0) {
        const auto k = static_cast<std::size_t>(std::llround(grid.t0_window / grid.dt));
        diag.t0_steps = std::clamp<std::size_t>(k, 1, grid.steps);
    } else {
        diag.t0_steps = select_contraction_window(diag.profiles, opt);
    }
    diag.t0 = grid.time(diag.t0_steps);
    diag.d.clear();
    diag.ratio.clear();
    for (std::size_t n = 0; n < diag.profiles.size(); ++n) {
        diag.d.push_back(diag.profiles[n][diag.t0_steps]);
        const double prev = n == 0 ? 0.0 : diag.d[n - 1];
        diag.ratio.push_back(prev > 0.0 ? diag.d[n] / prev : std::numeric_limits<double>::quiet_NaN());
    }
}

namespace detail {

/// Writes the running-sup profile of mean_i |a_i - b_i|² and returns the
/// stopping metric sup_k mean_i |a_i(t_k) - b_i(t_k)|².
inline double iterate_distance(const PathSet& a, const PathSet* b, const Ensemble& initial,
                               std::vector<double>& profile) {
    const std::size_t steps = a.steps();
    const std::size_t n = a.dim();
    profile.assign(steps + 1, 0.0);
    std::vector<double> per_time(steps + 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        double running = 0.0;
        const auto x0 = initial[i].terminal();
        for (std::size_t k = 0; k <= steps; ++k) {
            const auto x = a.state(i, static_cast<std::ptrdiff_t>(k));
            const auto y = b ? b->state(i, static_cast<std::ptrdiff_t>(k)) : x0;
            double sq = 0.0;
            for (std::size_t c = 0; c < n; ++c) sq += (x[c] - y[c]) * (x[c] - y[c]);
            running = std::max(running, sq);
            profile[k] += running;
            per_time[k] += sq;
        }
    }
    const double inv = 1.0 / static_cast<double>(a.size());
    for (double& v : profile) v *= inv;
    double metric = 0.0;
    for (double v : per_time) metric = std::max(metric, v * inv);
    return metric;
}

}  // namespace detail

struct PicardResult {
    std::shared_ptr<const PathSet> paths;
    MeasureFlow flow;
    PicardDiagnostics diagnostics;
};

struct PicardSystem {
    const Ensemble* initial;
    const CoefficientSet* coefficients;
};

/// Picard iteration in distribution for several systems in lockstep: every
/// system performs the same number of iterations, all with the same NoisePlan,
/// and iteration stops once every system meets `tol`.
inline std::vector<PicardResult> picard_lockstep(std::span<const PicardSystem> systems, const SimGrid& grid,
                                                 const NoisePlan& noise, const PicardOptions& opt) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("picard tol must be positive");
    if (opt.max_iter < 1) throw std::invalid_argument("picard max_iter must be >= 1");
    std::vector<PicardResult> out(systems.size());
    for (std::size_t s = 0; s < systems.size(); ++s) {
        detail::require_initial(*systems[s].initial, *systems[s].coefficients, grid);
        out[s].flow = MeasureFlow::frozen(*systems[s].initial);
    }
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        bool all_done = true;
        for (std::size_t s = 0; s < systems.size(); ++s) {
            auto& r = out[s];
            auto next = std::make_shared<const PathSet>(
                solve_frozen(*systems[s].initial, r.flow, *systems[s].coefficients, noise, grid, opt.step));
            std::vector<double> profile;
            const double metric = detail::iterate_distance(*next, r.paths.get(), *systems[s].initial, profile);
            r.diagnostics.profiles.push_back(std::move(profile));
            r.diagnostics.stop_metric.push_back(metric);
            r.diagnostics.final_distance = metric;
            r.diagnostics.iterations = it;
            r.paths = next;
            r.flow = MeasureFlow::from_paths(next);
            all_done = all_done && metric <= opt.tol;
        }
        if (all_done) {
            for (auto& r : out) r.diagnostics.converged = true;
            break;
        }
    }
    for (auto& r : out) finalize_diagnostics(r.diagnostics, grid, opt);
    return out;
}

inline PicardResult picard(const Ensemble& initial, const CoefficientSet& cs, const SimGrid& grid,
                           const NoisePlan& noise, const PicardOptions& opt = {}) {
    const PicardSystem sys{&initial, &cs};
    return std::move(picard_lockstep(std::span(&sys, 1), grid, noise, opt).front());
}

/// Two systems driven by the same Brownian increments, aligned by particle index.
struct PairedPaths {
    std::shared_ptr<const PathSet> left, right;
    MeasureFlow left_flow, right_flow;
    PicardDiagnostics left_diagnostics, right_diagnostics;
    std::uint64_t seed = 0;
    std::size_t initially_ordered = 0;  ///< pairs with ξ_i ≤_D ξ̄_i

    std::size_t size() const { return left->size(); }
    bool initial_order_holds() const { return initially_ordered == left->size(); }
};

inline PairedPaths coupled_simulate(const Ensemble& xi, const Ensemble& xi_bar, const CoefficientSet& cs,
                                    const CoefficientSet& cs_bar, const SimGrid& grid, const NoisePlan& noise,
                                    const PicardOptions& opt = {}) {
    if (xi.size() != xi_bar.size()) throw std::invalid_argument("coupled systems need equal N");
    if (cs.noise_dim() != cs_bar.noise_dim()) throw std::invalid_argument("coupled systems need equal m");
    const PicardSystem systems[2] = {{&xi, &cs}, {&xi_bar, &cs_bar}};
    auto res = picard_lockstep(systems, grid, noise, opt);
    PairedPaths pp;
    pp.left = res[0].paths;
    pp.right = res[1].paths;
    pp.left_flow = res[0].flow;
    pp.right_flow = res[1].flow;
    pp.left_diagnostics = std::move(res[0].diagnostics);
    pp.right_diagnostics = std::move(res[1].diagnostics);
    pp.seed = noise.seed();
    for (std::size_t i = 0; i < xi.size(); ++i)
        if (leq_D(xi[i], xi_bar[i], *cs.neutral)) ++pp.initially_ordered;
    return pp;
}

}  // namespace nsfde
