#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "nsfde/segment.hpp"

namespace nsfde {

/// N equally weighted segments: an empirical measure on segment space.
class Ensemble {
public:
    Ensemble() = default;

    explicit Ensemble(std::vector<Segment> members) : members_(std::move(members)) {
        if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
        for (const auto& m : members_) require_same_grid(members_.front(), m);
        const std::size_t n = members_.front().dim();
        terminal_mean_.assign(n, 0.0);
        for (const auto& m : members_) {
            const auto x0 = m.terminal();
            for (std::size_t i = 0; i < n; ++i) terminal_mean_[i] += x0[i];
        }
        for (double& v : terminal_mean_) v /= static_cast<double>(members_.size());
    }

    /// δ_ξ replicated N times.
    static Ensemble replicate(const Segment& s, std::size_t count) {
        return Ensemble(std::vector<Segment>(count, s));
    }

    std::size_t size() const { return members_.size(); }
    std::size_t dim() const { return members_.front().dim(); }
    std::size_t intervals() const { return members_.front().intervals(); }
    double r0() const { return members_.front().r0(); }
    const Segment& operator[](std::size_t k) const { return members_[k]; }
    const std::vector<Segment>& members() const { return members_; }
    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }

    /// mean over members of ζ(0)
    const std::vector<double>& terminal_mean() const { return terminal_mean_; }

    friend bool operator==(const Ensemble& a, const Ensemble& b) { return a.members_ == b.members_; }

private:
    std::vector<Segment> members_;
    std::vector<double> terminal_mean_;
};

inline void require_compatible(const Ensemble& a, const Ensemble& b) {
    require_same_grid(a[0], b[0]);
}

/// (1/N)·Σ ‖ξ_k‖∞²
inline double second_moment(const Ensemble& mu) {
    double acc = 0.0;
    for (const auto& m : mu) {
        const double s = sup_norm(m);
        acc += s * s;
    }
    return acc / static_cast<double>(mu.size());
}

/// Long-format CSV: member,theta,x1,...,xn
inline void write_ensemble_csv(std::ostream& os, const Ensemble& mu, int precision = 17) {
    csv::Writer w(os, precision);
    auto names = state_column_names(mu.dim());
    names.insert(names.begin(), {"member", "theta"});
    w.header(names);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const auto& s = mu[k];
        for (std::size_t j = 0; j < s.points(); ++j) w.row_with(s.row(j), k, s.view().theta(j));
    }
}

inline Ensemble read_ensemble_csv(std::istream& is) {
    const auto table = csv::read_table(is);
    if (table.header.size() < 3 || table.header[0] != "member" || table.header[1] != "theta")
        throw csv::ParseError("ensemble CSV must start with member,theta columns");
    const std::size_t dim = table.header.size() - 2;
    std::map<long long, std::vector<const std::vector<double>*>> by_member;
    for (const auto& r : table.rows) {
        const double id = r[0];
        if (id < 0 || id != std::floor(id)) throw csv::ParseError("member index must be a nonnegative integer");
        by_member[static_cast<long long>(id)].push_back(&r);
    }
    std::vector<Segment> members;
    long long expect = 0;
    for (auto& [id, rows] : by_member) {
        if (id != expect++) throw csv::ParseError("member indices must be contiguous from 0");
        if (rows.size() < 2) throw csv::ParseError("member needs at least two grid points");
        const double r0 = -(*rows.front())[1];
        std::vector<double> values;
        for (const auto* r : rows) values.insert(values.end(), r->begin() + 2, r->end());
        members.emplace_back(rows.size() - 1, dim, r0, std::move(values));
    }
    return Ensemble(std::move(members));
}

}  // namespace nsfde
