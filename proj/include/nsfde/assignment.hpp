#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nsfde {

/// Dense row-major square cost matrix.
class CostMatrix {
public:
    explicit CostMatrix(std::size_t n) : n_(n), c_(n * n, 0.0) {}
    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return c_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return c_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<double> c_;
};

/// A permutation: row i is matched to column assignment[i].
using Assignment = std::vector<std::size_t>;

inline bool is_permutation_of_iota(const Assignment& a) {
    std::vector<char> seen(a.size(), 0);
    for (auto j : a) {
        if (j >= a.size() || seen[j]) return false;
        seen[j] = 1;
    }
    return true;
}

/// Minimum-cost perfect matching by shortest augmenting paths with
/// potentials (Hungarian method), O(N³).
inline Assignment solve_assignment(const CostMatrix& cost) {
    const std::size_t n = cost.size();
    if (n == 0) return {};
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based with a virtual column 0
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment a(n);
    for (std::size_t j = 1; j <= n; ++j) a[p[j] - 1] = j - 1;
    return a;
}

/// Sum of cost(i, a[i]) accumulated in row order.
inline double assignment_cost(const CostMatrix& cost, const Assignment& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += cost(i, a[i]);
    return s;
}

/// Dense bipartite graph: edge (i, j) present iff admissible(i, j).
class BipartiteGraph {
public:
    explicit BipartiteGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}
    std::size_t size() const { return n_; }
    bool operator()(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool on = true) { adj_[i * n_ + j] = on ? 1 : 0; }

private:
    std::size_t n_;
    std::vector<char> adj_;
};

/// Perfect matching via augmenting paths (Kuhn), or nullopt when none exists.
inline std::optional<Assignment> perfect_matching(const BipartiteGraph& g) {
    const std::size_t n = g.size();
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> match_col(n, none);  // column -> row
    std::vector<std::size_t> visited(n, none);

    // iterative DFS keeps deep augmenting paths off the call stack
    auto augment = [&](std::size_t root) {
        std::vector<std::size_t> row_stack{root};
        std::vector<std::size_t> next_col{0};
        std::vector<std::size_t> via_col;
        while (!row_stack.empty()) {
            const std::size_t r = row_stack.back();
            std::size_t& j = next_col.back();
            bool descended = false;
            for (; j < n; ++j) {
                if (!g(r, j) || visited[j] == root) continue;
                visited[j] = root;
                if (match_col[j] == none) {
                    // flip the path
                    match_col[j] = r;
                    for (std::size_t d = via_col.size(); d-- > 0;) match_col[via_col[d]] = row_stack[d];
                    return true;
                }
                via_col.push_back(j);
                row_stack.push_back(match_col[j]);
                ++j;
                next_col.push_back(0);
                descended = true;
                break;
            }
            if (!descended) {
                row_stack.pop_back();
                next_col.pop_back();
                if (!via_col.empty()) via_col.pop_back();
            }
        }
        return false;
    };

    for (std::size_t i = 0; i < n; ++i)
        if (!augment(i)) return std::nullopt;

    Assignment a(n);
    for (std::size_t j = 0; j < n; ++j) a[match_col[j]] = j;
    return a;
}

}  // namespace nsfde
