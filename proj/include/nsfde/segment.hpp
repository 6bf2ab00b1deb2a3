#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsfde/csv.hpp"

namespace nsfde {

/// Raised when two segments (or ensembles) do not live on the same θ-grid.
class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-owning view of a discretized element of C([-r0,0]; R^n).
///
/// Values are stored row-major: row j holds the state at θ_j = -r0 + j·Δθ,
/// j = 0..K, so row K is the value at θ = 0.
class SegmentView {
public:
    SegmentView() = default;
    SegmentView(std::span<const double> values, std::size_t dim, double dtheta)
        : values_(values), dim_(dim), dtheta_(dtheta) {}

    std::size_t dim() const { return dim_; }
    std::size_t intervals() const { return values_.size() / dim_ - 1; }
    std::size_t points() const { return values_.size() / dim_; }
    double dtheta() const { return dtheta_; }
    double r0() const { return dtheta_ * static_cast<double>(intervals()); }
    double theta(std::size_t j) const {
        return -r0() + dtheta_ * static_cast<double>(j);
    }

    double operator()(std::size_t j, std::size_t i) const { return values_[j * dim_ + i]; }
    std::span<const double> row(std::size_t j) const { return values_.subspan(j * dim_, dim_); }
    std::span<const double> terminal() const { return row(intervals()); }
    std::span<const double> oldest() const { return row(0); }
    std::span<const double> values() const { return values_; }

    /// Piecewise-linear evaluation at θ ∈ [-r0, 0]. Grid points are returned exactly.
    double at(double theta, std::size_t i) const {
        const double pos = (theta + r0()) / dtheta_;
        if (pos <= 0.0) return (*this)(0, i);
        const auto k = intervals();
        if (pos >= static_cast<double>(k)) return (*this)(k, i);
        const auto j = static_cast<std::size_t>(std::floor(pos));
        const double w = pos - static_cast<double>(j);
        if (w == 0.0) return (*this)(j, i);
        return (1.0 - w) * (*this)(j, i) + w * (*this)(j + 1, i);
    }

private:
    std::span<const double> values_;
    std::size_t dim_ = 1;
    double dtheta_ = 1.0;
};

/// Owning segment with value semantics.
class Segment {
public:
    Segment() = default;

    /// Zero segment with K intervals on [-r0, 0].
    Segment(std::size_t intervals, std::size_t dim, double r0)
        : Segment(intervals, dim, r0, std::vector<double>((intervals + 1) * dim, 0.0)) {}

    Segment(std::size_t intervals, std::size_t dim, double r0, std::vector<double> values)
        : values_(std::move(values)), dim_(dim), dtheta_(r0 / static_cast<double>(intervals)) {
        if (intervals < 1) throw std::invalid_argument("segment needs K >= 1");
        if (dim < 1) throw std::invalid_argument("segment needs n >= 1");
        if (!(r0 > 0.0) || !std::isfinite(r0)) throw std::invalid_argument("segment needs r0 > 0");
        if (values_.size() != (intervals + 1) * dim)
            throw std::invalid_argument("segment value count does not match (K+1)*n");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("segment values must be finite");
    }

    explicit Segment(SegmentView v)
        : values_(v.values().begin(), v.values().end()), dim_(v.dim()), dtheta_(v.dtheta()) {}

    static Segment constant(std::size_t intervals, std::size_t dim, double r0, double c) {
        return Segment(intervals, dim, r0, std::vector<double>((intervals + 1) * dim, c));
    }

    static Segment constant(std::size_t intervals, double r0, std::span<const double> c) {
        std::vector<double> v;
        v.reserve((intervals + 1) * c.size());
        for (std::size_t j = 0; j <= intervals; ++j) v.insert(v.end(), c.begin(), c.end());
        return Segment(intervals, c.size(), r0, std::move(v));
    }

    /// The all-ones segment e on the grid of `like`.
    static Segment ones_like(SegmentView like) {
        return constant(like.intervals(), like.dim(), like.r0(), 1.0);
    }

    SegmentView view() const { return {values_, dim_, dtheta_}; }
    operator SegmentView() const { return view(); }

    std::size_t dim() const { return dim_; }
    std::size_t intervals() const { return values_.size() / dim_ - 1; }
    std::size_t points() const { return values_.size() / dim_; }
    double dtheta() const { return dtheta_; }
    double r0() const { return view().r0(); }

    double operator()(std::size_t j, std::size_t i) const { return values_[j * dim_ + i]; }
    double& operator()(std::size_t j, std::size_t i) { return values_[j * dim_ + i]; }
    std::span<const double> row(std::size_t j) const { return view().row(j); }
    std::span<const double> terminal() const { return view().terminal(); }
    double at(double theta, std::size_t i) const { return view().at(theta, i); }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    friend bool operator==(const Segment& a, const Segment& b) {
        return a.dim_ == b.dim_ && a.dtheta_ == b.dtheta_ && a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
    std::size_t dim_ = 1;
    double dtheta_ = 1.0;
};

inline bool same_grid(SegmentView a, SegmentView b) {
    if (a.dim() != b.dim() || a.points() != b.points()) return false;
    return std::abs(a.dtheta() - b.dtheta()) <= 1e-12 * std::max(a.dtheta(), b.dtheta());
}

inline void require_same_grid(SegmentView a, SegmentView b) {
    if (!same_grid(a, b))
        throw GridMismatch("segments differ in grid: K=" + std::to_string(a.intervals()) + "/" +
                           std::to_string(b.intervals()) + ", n=" + std::to_string(a.dim()) + "/" +
                           std::to_string(b.dim()));
}

/// ‖s‖∞ with the Euclidean norm at each θ.
inline double sup_norm(SegmentView s) {
    double best = 0.0;
    for (std::size_t j = 0; j < s.points(); ++j) {
        double sq = 0.0;
        for (double v : s.row(j)) sq += v * v;
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

/// max_i ‖s^i‖∞, the norm on the right-hand side of the neutral-term contraction.
inline double componentwise_sup_norm(SegmentView s) {
    double best = 0.0;
    for (double v : s.values()) best = std::max(best, std::abs(v));
    return best;
}

/// Sup-norm distance without materializing the difference.
inline double sup_distance(SegmentView a, SegmentView b) {
    require_same_grid(a, b);
    double best = 0.0;
    const std::size_t n = a.dim();
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t j = 0; j < a.points(); ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = av[j * n + i] - bv[j * n + i];
            sq += d * d;
        }
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

inline double componentwise_sup_distance(SegmentView a, SegmentView b) {
    require_same_grid(a, b);
    double best = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) best = std::max(best, std::abs(av[k] - bv[k]));
    return best;
}

/// a ≤ b componentwise at every grid point.
inline bool leq(SegmentView a, SegmentView b) {
    require_same_grid(a, b);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k)
        if (av[k] > bv[k]) return false;
    return true;
}

/// a ≤ b and a ≠ b.
inline bool lt(SegmentView a, SegmentView b) {
    if (!leq(a, b)) return false;
    return !std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

/// a ≪ b: strict inequality at every grid point and component.
inline bool ll(SegmentView a, SegmentView b) {
    require_same_grid(a, b);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k)
        if (!(av[k] < bv[k])) return false;
    return true;
}

inline Segment meet(SegmentView a, SegmentView b) {
    require_same_grid(a, b);
    std::vector<double> v(a.values().size());
    std::transform(a.values().begin(), a.values().end(), b.values().begin(), v.begin(),
                   [](double x, double y) { return std::min(x, y); });
    return Segment(a.intervals(), a.dim(), a.r0(), std::move(v));
}

/// s + c·e
inline Segment shifted(SegmentView s, double c) {
    std::vector<double> v(s.values().begin(), s.values().end());
    for (double& x : v) x += c;
    return Segment(s.intervals(), s.dim(), s.r0(), std::move(v));
}

inline Segment added(SegmentView a, SegmentView b) {
    require_same_grid(a, b);
    std::vector<double> v(a.values().size());
    std::transform(a.values().begin(), a.values().end(), b.values().begin(), v.begin(),
                   std::plus<>{});
    return Segment(a.intervals(), a.dim(), a.r0(), std::move(v));
}

inline Segment scaled(SegmentView s, double c) {
    std::vector<double> v(s.values().begin(), s.values().end());
    for (double& x : v) x *= c;
    return Segment(s.intervals(), s.dim(), s.r0(), std::move(v));
}

inline std::vector<std::string> state_column_names(std::size_t dim) {
    std::vector<std::string> names;
    for (std::size_t i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
    return names;
}

/// CSV with one row per grid point: theta,x1,...,xn
inline void write_segment_csv(std::ostream& os, SegmentView s, int precision = 17) {
    csv::Writer w(os, precision);
    auto names = state_column_names(s.dim());
    names.insert(names.begin(), "theta");
    w.header(names);
    for (std::size_t j = 0; j < s.points(); ++j) w.row_with(s.row(j), s.theta(j));
}

inline Segment read_segment_csv(std::istream& is) {
    const auto table = csv::read_table(is);
    if (table.header.size() < 2 || table.header.front() != "theta")
        throw csv::ParseError("segment CSV must start with a theta column");
    if (table.rows.size() < 2) throw csv::ParseError("segment CSV needs at least two grid points");
    const std::size_t dim = table.header.size() - 1;
    const std::size_t k = table.rows.size() - 1;
    const double r0 = -table.rows.front()[0];
    if (std::abs(table.rows.back()[0]) > 1e-9 * std::max(1.0, r0))
        throw csv::ParseError("segment CSV must end at theta = 0");
    std::vector<double> values;
    values.reserve(table.rows.size() * dim);
    for (const auto& r : table.rows) values.insert(values.end(), r.begin() + 1, r.end());
    return Segment(k, dim, r0, std::move(values));
}

}  // namespace nsfde
