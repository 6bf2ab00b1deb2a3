#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsfde/coefficients.hpp"
#include "nsfde/ensemble.hpp"
#include "nsfde/neutral_term.hpp"
#include "nsfde/sampler.hpp"
#include "nsfde/solver.hpp"

namespace nsfde {

/// Two coefficient sets with pairwise-aligned initial ensembles.
struct ComparisonSetup {
    CoefficientSet cs, cs_bar;
    Ensemble xi, xi_bar;
    std::string description;
};

inline Eigen::MatrixXd scalar_matrix(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

/// n = m = 1, D(ξ) = 0.5·ξ(-r0), b = -ξ(0) + 0.8·mean + 0.2, σ = 0.3·(ξ(0) - D(ξ)) + 0.5.
inline CoefficientSet mean_field_benchmark() {
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.5), 0.5);
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(-1.0), scalar_matrix(0.8),
                                                    Eigen::VectorXd::Constant(1, 0.2));
    auto s = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.3), scalar_matrix(0.5), d);
    return CoefficientSet::assemble(d, b, s);
}

/// b = 0, σ = 0, D(ξ) = κ·ξ(-r0): X(t) = X(t-r0)·κ + const along each path.
inline CoefficientSet pure_neutral_family(double kappa, std::size_t n = 1) {
    auto d = std::make_shared<LaggedLinearNeutral>(kappa * Eigen::MatrixXd::Identity(n, n), kappa);
    auto zero_n = Eigen::MatrixXd::Zero(n, n);
    auto b = std::make_shared<MeanFieldLinearDrift>(zero_n, zero_n, Eigen::VectorXd::Zero(n));
    auto s = std::make_shared<NeutralAffineDiffusion>(Eigen::MatrixXd::Zero(n, 1), Eigen::MatrixXd::Zero(n, 1), d);
    return CoefficientSet::assemble(d, b, s);
}

/// D = 0, σ = 0, b = B·ξ(0) + C·mean: the mean solves m' = (B + C)m.
inline CoefficientSet deterministic_mean_field(const Eigen::MatrixXd& b_mat, const Eigen::MatrixXd& c_mat) {
    const auto n = static_cast<std::size_t>(b_mat.rows());
    auto d = std::make_shared<ZeroNeutral>(n);
    auto b = std::make_shared<MeanFieldLinearDrift>(b_mat, c_mat, Eigen::VectorXd::Zero(b_mat.rows()));
    auto s = std::make_shared<NeutralAffineDiffusion>(Eigen::MatrixXd::Zero(b_mat.rows(), 1),
                                                      Eigen::MatrixXd::Zero(b_mat.rows(), 1), d);
    return CoefficientSet::assemble(d, b, s);
}

inline Ensemble sampled_ensemble(std::uint64_t seed, std::size_t count, const SimGrid& grid, std::size_t dim,
                                 double amplitude = 1.0) {
    RandomSegmentSampler s(seed, grid.history_steps, dim, grid.r0(), amplitude);
    return s.ensemble(count);
}

/// Member p shifted up by gaps[p]·(1,…,1).
inline Ensemble shifted_ensemble(const Ensemble& mu, const std::vector<double>& gaps) {
    if (gaps.size() != mu.size()) throw std::invalid_argument("one gap per member is required");
    std::vector<Segment> m;
    m.reserve(mu.size());
    for (std::size_t p = 0; p < mu.size(); ++p) m.push_back(shifted(mu[p], gaps[p]));
    return Ensemble(std::move(m));
}

inline Ensemble shifted_ensemble(const Ensemble& mu, double gap) {
    return shifted_ensemble(mu, std::vector<double>(mu.size(), gap));
}

namespace detail {

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                                      double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = u(rng);
    return a;
}

inline std::string describe_matrix(const Eigen::MatrixXd& a) {
    std::ostringstream os;
    os.precision(6);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (i) os << ';';
        for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? "," : "") << a(i, j);
    }
    return os.str();
}

/// A random monotone neutral term with κ in [0.2, 0.7].
inline NeutralTermPtr random_monotone_neutral(std::mt19937_64& rng, std::size_t n, std::string& desc) {
    const double kappa = std::uniform_real_distribution<double>(0.2, 0.7)(rng);
    const auto kind = std::uniform_int_distribution<int>(0, 3)(rng);
    const auto nn = static_cast<Eigen::Index>(n);
    if (kind == 0 || kind == 1) {
        Eigen::MatrixXd a = uniform_matrix(rng, nn, nn, 0.0, 1.0);
        a *= kappa / detail::linear_kappa(a);
        desc += (kind == 0 ? "D=lagged_linear[" : "D=averaged_linear[") + describe_matrix(a) + "]";
        if (kind == 0) return std::make_shared<LaggedLinearNeutral>(a, std::min(0.99, kappa * (1 + 1e-12)));
        return std::make_shared<AveragedLinearNeutral>(a, std::min(0.99, kappa * (1 + 1e-12)));
    }
    if (kind == 2) {
        desc += "D=tanh_lagged[" + std::to_string(kappa) + "]";
        return std::make_shared<TanhLaggedNeutral>(n, kappa);
    }
    desc += "D=zero";
    return std::make_shared<ZeroNeutral>(n);
}

}  // namespace detail

/// A configuration satisfying the comparison conditions: monotone D shared
/// by both systems, b = B·ξ(0) + C·mean + g0 + g1·sin(ωt) with B, C ≥ 0
/// entrywise, b̄ = b + ε with ε ≥ 0, identical σ depending on ξ only through
/// the D-coordinate, and ξ̄_p = ξ_p + c_p·(1,…,1) with c_p ≥ 0 (some zero).
inline ComparisonSetup random_compliant_setup(std::uint64_t seed, std::size_t n, std::size_t m, std::size_t count,
                                              const SimGrid& grid) {
    std::mt19937_64 rng(seed);
    const auto nn = static_cast<Eigen::Index>(n);
    const auto mm = static_cast<Eigen::Index>(m);
    std::string desc;
    auto d = detail::random_monotone_neutral(rng, n, desc);
    const Eigen::MatrixXd b_mat = detail::uniform_matrix(rng, nn, nn, 0.0, 0.5);
    const Eigen::MatrixXd c_mat = detail::uniform_matrix(rng, nn, nn, 0.0, 0.5);
    const Eigen::VectorXd g0 = detail::uniform_matrix(rng, nn, 1, -0.5, 0.5);
    const Eigen::VectorXd g1 = detail::uniform_matrix(rng, nn, 1, 0.0, 0.3);
    const double omega = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const double eps = std::uniform_real_distribution<double>(0.0, 0.2)(rng);
    Eigen::MatrixXd s_mat = detail::uniform_matrix(rng, nn, mm, -1.0, 1.0);
    // row sums of |S| at most 0.8 keep 1 + Σ_j S_ij ΔW_j positive at dt ≤ 1e-2
    for (Eigen::Index i = 0; i < nn; ++i) {
        const double r = s_mat.row(i).cwiseAbs().sum();
        if (r > 0.0) s_mat.row(i) *= std::uniform_real_distribution<double>(0.0, 0.8)(rng) / r;
    }
    const Eigen::MatrixXd c_sig = detail::uniform_matrix(rng, nn, mm, -0.5, 0.5);

    auto b = std::make_shared<MeanFieldLinearDrift>(b_mat, c_mat, g0, g1, omega);
    auto sigma = std::make_shared<NeutralAffineDiffusion>(s_mat, c_sig, d);
    auto cs = CoefficientSet::assemble(d, b, sigma);
    auto cs_bar = cs.with_drift(std::make_shared<ShiftedDrift>(b, eps));

    auto xi = sampled_ensemble(rng(), count, grid, n);
    std::vector<double> gaps(count);
    std::uniform_real_distribution<double> gap(0.0, 0.1);
    for (auto& g : gaps) g = std::uniform_int_distribution<int>(0, 3)(rng) == 0 ? 0.0 : gap(rng);
    auto xi_bar = shifted_ensemble(xi, gaps);

    desc += " B=[" + detail::describe_matrix(b_mat) + "] C=[" + detail::describe_matrix(c_mat) +
            "] eps=" + std::to_string(eps) + " S=[" + detail::describe_matrix(s_mat) + "]";
    return {std::move(cs), std::move(cs_bar), std::move(xi), std::move(xi_bar), std::move(desc)};
}

/// σ reads ξ(-r0), which is not a function of the D-coordinate, so
/// condition (ii) fails; otherwise identical systems with a 0.05 initial gap.
inline ComparisonSetup lagged_noise_falsifier(std::uint64_t seed, std::size_t count, const SimGrid& grid) {
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.3), 0.3);
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(0.2), scalar_matrix(0.2),
                                                    Eigen::VectorXd::Zero(1));
    auto sigma = std::make_shared<LaggedStateDiffusion>(scalar_matrix(2.0), scalar_matrix(0.2));
    auto cs = CoefficientSet::assemble(d, b, sigma);
    auto xi = sampled_ensemble(seed, count, grid, 1);
    auto xi_bar = shifted_ensemble(xi, 0.05);
    return {cs, cs, std::move(xi), std::move(xi_bar), "sigma=lagged_state[2;0.2] D=lagged_linear[0.3]"};
}

/// b = C·mean with C < 0 and heterogeneous initial gaps: pairs that start
/// equal are pushed apart in the wrong direction by the larger right mean.
inline ComparisonSetup negative_mean_field_falsifier(std::size_t count, const SimGrid& grid) {
    auto d = std::make_shared<ZeroNeutral>(1);
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(0.0), scalar_matrix(-2.0),
                                                    Eigen::VectorXd::Zero(1));
    auto sigma = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.0), scalar_matrix(0.0), d);
    auto cs = CoefficientSet::assemble(d, b, sigma);
    auto xi = Ensemble::replicate(Segment::constant(grid.history_steps, 1, grid.r0(), -1.0), count);
    std::vector<double> gaps(count);
    for (std::size_t p = 0; p < count; ++p) gaps[p] = p % 2 == 0 ? 0.0 : 1.0;
    auto xi_bar = shifted_ensemble(xi, gaps);
    return {cs, cs, std::move(xi), std::move(xi_bar), "b=-2*mean D=zero"};
}

/// Random configuration that may break the comparison conditions: C may be
/// negative, ε may be negative, σ may read the lagged state.
inline ComparisonSetup random_fuzz_setup(std::uint64_t seed, std::size_t n, std::size_t m, std::size_t count,
                                         const SimGrid& grid) {
    auto base = random_compliant_setup(seed, n, m, count, grid);
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::uniform_int_distribution<int> coin(0, 2);
    const auto nn = static_cast<Eigen::Index>(n);
    const auto mm = static_cast<Eigen::Index>(m);
    std::string desc = base.description;

    const auto& lin = dynamic_cast<const MeanFieldLinearDrift&>(*base.cs.drift);
    Eigen::MatrixXd c_mat = lin.c_matrix();
    if (coin(rng) == 0) {
        c_mat = detail::uniform_matrix(rng, nn, nn, -2.0, 0.0);
        desc += " C->[" + detail::describe_matrix(c_mat) + "]";
    }
    auto b = std::make_shared<MeanFieldLinearDrift>(lin.b_matrix(), c_mat, Eigen::VectorXd::Zero(nn));
    const double eps = coin(rng) == 0 ? -std::uniform_real_distribution<double>(0.0, 0.3)(rng)
                                      : std::uniform_real_distribution<double>(0.0, 0.1)(rng);
    desc += " eps->" + std::to_string(eps);

    DiffusionPtr sigma = base.cs.diffusion;
    if (coin(rng) == 0) {
        const Eigen::MatrixXd s = detail::uniform_matrix(rng, nn, mm, 0.5, 2.0);
        sigma = std::make_shared<LaggedStateDiffusion>(s, detail::uniform_matrix(rng, nn, mm, 0.0, 0.3));
        desc += " sigma->lagged_state[" + detail::describe_matrix(s) + "]";
    }
    auto cs = CoefficientSet::assemble(base.cs.neutral, b, sigma);
    auto cs_bar = cs.with_drift(std::make_shared<ShiftedDrift>(b, eps));
    return {std::move(cs), std::move(cs_bar), std::move(base.xi), std::move(base.xi_bar), std::move(desc)};
}

}  // namespace nsfde
