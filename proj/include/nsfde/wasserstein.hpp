#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>
#include <stdexcept>

#include "nsfde/assignment.hpp"
#include "nsfde/ensemble.hpp"
#include "nsfde/segment_orders.hpp"

namespace nsfde {

namespace detail {

inline void require_equal_size(const Ensemble& mu, const Ensemble& nu) {
    if (mu.size() != nu.size())
        throw std::invalid_argument("ensembles must have equal size (" + std::to_string(mu.size()) +
                                    " vs " + std::to_string(nu.size()) + ")");
    require_compatible(mu, nu);
}

}  // namespace detail

/// Ground cost ‖ξ_i - η_j‖∞² for every member pair.
inline CostMatrix squared_sup_costs(const Ensemble& mu, const Ensemble& nu) {
    detail::require_equal_size(mu, nu);
    CostMatrix c(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) {
            const double d = sup_distance(mu[i], nu[j]);
            c(i, j) = d * d;
        }
    return c;
}

struct TransportResult {
    double distance = 0.0;
    Assignment coupling;
};

/// Exact W2 between equal-size empirical measures with sup-norm ground cost.
inline TransportResult w2_with_coupling(const Ensemble& mu, const Ensemble& nu) {
    const auto cost = squared_sup_costs(mu, nu);
    auto a = solve_assignment(cost);
    // summing the matched costs in sorted order makes w2(μ,ν) and w2(ν,μ) bit-identical
    std::vector<double> terms(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) terms[i] = cost(i, a[i]);
    std::sort(terms.begin(), terms.end());
    const double total = std::accumulate(terms.begin(), terms.end(), 0.0);
    return {std::sqrt(std::max(0.0, total) / static_cast<double>(mu.size())), std::move(a)};
}

inline double w2(const Ensemble& mu, const Ensemble& nu) { return w2_with_coupling(mu, nu).distance; }

/// Exhaustive minimum over all N! couplings; test oracle for w2, N ≤ 8.
inline double w2_bruteforce(const Ensemble& mu, const Ensemble& nu) {
    if (mu.size() > 8) throw std::invalid_argument("w2_bruteforce supports N <= 8");
    const auto cost = squared_sup_costs(mu, nu);
    Assignment perm(mu.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, assignment_cost(cost, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(std::max(0.0, best) / static_cast<double>(mu.size()));
}

/// √((1/N)Σ‖ξ_i - η_i‖∞²): the index-aligned coupling's cost, an upper bound for W2.
inline double aligned_coupling_distance(const Ensemble& mu, const Ensemble& nu) {
    detail::require_equal_size(mu, nu);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double d = sup_distance(mu[i], nu[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(mu.size()));
}

/// Empirical μ ≤_D ν: a coupling supported on {ξ ≤_D η} exists iff the
/// bipartite graph of ≤_D-admissible pairs has a perfect matching. The
/// matching is returned as witness; nullopt means "not provably ordered".
inline std::optional<Assignment> stochastic_leq_D(const Ensemble& mu, const Ensemble& nu,
                                                  const NeutralTerm& d, double tol = 0.0) {
    detail::require_equal_size(mu, nu);
    const std::size_t n = mu.size();
    // D-coordinates once per member instead of once per edge
    std::vector<std::vector<double>> cmu(n), cnu(n);
    for (std::size_t i = 0; i < n; ++i) {
        cmu[i] = d.d_coordinates(mu[i]);
        cnu[i] = d.d_coordinates(nu[i]);
    }
    BipartiteGraph g(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            bool ok = true;
            for (std::size_t c = 0; c < cmu[i].size() && ok; ++c) ok = cmu[i][c] <= cnu[j][c] + tol;
            if (!ok) continue;
            const auto av = mu[i].values();
            const auto bv = nu[j].values();
            for (std::size_t k = 0; k < av.size() && ok; ++k) ok = av[k] <= bv[k] + tol;
            g.set(i, j, ok);
        }
    return perfect_matching(g);
}

}  // namespace nsfde
