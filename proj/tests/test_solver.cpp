#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "nsfde/experiments.hpp"
#include "nsfde/solver.hpp"

using namespace nsfde;

namespace {

CoefficientSet constant_system(double drift, double sigma, NeutralTermPtr d = std::make_shared<ZeroNeutral>(1)) {
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(0.0), scalar_matrix(0.0),
                                                    Eigen::VectorXd::Constant(1, drift));
    auto s = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.0), scalar_matrix(sigma), d);
    return CoefficientSet::assemble(d, b, s);
}

Segment linear_history(std::size_t k, double r0) {
    std::vector<double> v(k + 1);
    for (std::size_t j = 0; j <= k; ++j) v[j] = 1.0 + (-r0 + r0 * static_cast<double>(j) / static_cast<double>(k));
    return Segment(k, 1, r0, std::move(v));
}

}  // namespace

TEST(EulerStep, ConstantDriftAndNoise) {
    const auto cs = constant_system(2.0, 0.5);
    const auto x = Segment::constant(4, 1, 0.04, 3.0);
    const double dw[] = {0.1};
    const auto next = euler_step(x.view(), 0.0, Ensemble({x}), cs, dw, 0.01);
    EXPECT_DOUBLE_EQ(next[0], 3.0 + 2.0 * 0.01 + 0.5 * 0.1);
}

TEST(EulerStep, ConstantSegmentIsStationaryUnderPureNeutral) {
    const auto cs = pure_neutral_family(0.5);
    const auto x = Segment::constant(4, 1, 0.04, 3.0);
    const double dw[] = {0.7};
    EXPECT_DOUBLE_EQ(euler_step(x.view(), 0.0, Ensemble({x}), cs, dw, 0.01)[0], 3.0);
}

TEST(EulerStep, ImplicitRecoveryForAveragedNeutral) {
    // D(x) = 0.6·mean of the window; the new value enters its own D term
    auto d = std::make_shared<AveragedLinearNeutral>(scalar_matrix(0.6));
    const auto cs = constant_system(1.0, 0.0, d);
    const Segment x(2, 1, 0.02, {0.0, 1.0, 2.0});
    const double dw[] = {0.0};
    const auto next = euler_step(x.view(), 0.0, Ensemble({x}), cs, dw, 0.01);
    const Segment after(2, 1, 0.02, {1.0, 2.0, next[0]});
    const double y = 2.0 - (*d)(x)[0] + 0.01;
    EXPECT_NEAR(next[0] - (*d)(after)[0], y, 1e-13);
}

TEST(EulerStep, RejectsMismatchedSpacingAndNoise) {
    const auto cs = constant_system(0.0, 0.0);
    const auto x = Segment::constant(4, 1, 1.0, 0.0);
    const double dw[] = {0.0};
    EXPECT_THROW(euler_step(x.view(), 0.0, Ensemble({x}), cs, dw, 0.01), std::invalid_argument);
    const auto y = Segment::constant(4, 1, 0.04, 0.0);
    EXPECT_THROW(euler_step(y.view(), 0.0, Ensemble({y}), cs, std::span<const double>{}, 0.01),
                 std::invalid_argument);
}

TEST(EulerStep, DivergentNeutralFixedPointThrows) {
    // κ declared below 1 but the map expands: recovery must report failure
    auto bad = std::make_shared<FunctionNeutral>(1, 0.9, [](SegmentView x, std::span<double> out) {
        out[0] = 3.0 * x.terminal()[0] + 1.0;
    });
    const auto cs = constant_system(1.0, 0.0, bad);
    const auto x = Segment::constant(2, 1, 0.02, 1.0);
    const double dw[] = {0.0};
    EXPECT_THROW(euler_step(x.view(), 0.0, Ensemble({x}), cs, dw, 0.01), ConvergenceError);
}

TEST(SolveFrozen, ZeroCoefficientsKeepPathsConstant) {
    const SimGrid grid{0.01, 30, 5};
    const auto cs = constant_system(0.0, 0.0);
    const auto init = sampled_ensemble(1, 4, grid, 1);
    const auto p = solve_frozen(init, MeasureFlow::frozen(init), cs, NoisePlan(1), grid);
    for (std::size_t i = 0; i < init.size(); ++i)
        for (std::size_t k = 0; k <= grid.steps; ++k)
            EXPECT_EQ(p.state(i, static_cast<std::ptrdiff_t>(k))[0], init[i].terminal()[0]);
}

TEST(SolveFrozen, PureNeutralMatchesRecursionOracle) {
    const double kappa = 0.45;
    const SimGrid grid{0.01, 300, 20};
    const auto cs = pure_neutral_family(kappa);
    const auto init = sampled_ensemble(2, 6, grid, 1);
    const auto p = solve_frozen(init, MeasureFlow::frozen(init), cs, NoisePlan(2), grid);
    const auto kk = static_cast<std::ptrdiff_t>(grid.history_steps);
    for (std::size_t i = 0; i < init.size(); ++i) {
        // x(k+1) = x(k) - κ·x(k-K) + κ·x(k+1-K), computed on a plain vector
        std::vector<double> x(init[i].points());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = init[i](j, 0);
        for (std::size_t k = 0; k < grid.steps; ++k) {
            const std::size_t now = x.size() - 1;
            x.push_back(x[now] - kappa * x[now - grid.history_steps] + kappa * x[now + 1 - grid.history_steps]);
        }
        for (std::ptrdiff_t k = -kk; k <= static_cast<std::ptrdiff_t>(grid.steps); ++k)
            EXPECT_NEAR(p.state(i, k)[0], x[static_cast<std::size_t>(k + kk)], 1e-12);
        // the D-coordinate is conserved
        const double c0 = cs.neutral->d_coordinate(init[i], 0);
        for (std::size_t k = 0; k <= grid.steps; ++k)
            EXPECT_NEAR(cs.neutral->d_coordinate(Segment(p.segment(i, k)), 0), c0, 1e-12);
    }
}

TEST(SolveFrozen, DeterministicAndOrderIndependent) {
    const SimGrid grid{0.01, 50, 10};
    const auto cs = mean_field_benchmark();
    const auto init = sampled_ensemble(3, 5, grid, 1);
    const auto flow = MeasureFlow::frozen(init);
    const auto a = solve_frozen(init, flow, cs, NoisePlan(9), grid);
    const auto b = solve_frozen(init, flow, cs, NoisePlan(9), grid);
    EXPECT_TRUE(a == b);
    const auto c = solve_frozen(init, flow, cs, NoisePlan(10), grid);
    EXPECT_FALSE(a == c);
    // increments depend on the particle index only, not on the ensemble size
    const Ensemble first({init[0]});
    const auto single = solve_frozen(first, MeasureFlow::frozen(first), constant_system(0.0, 1.0), NoisePlan(9), grid);
    const auto full = solve_frozen(init, flow, constant_system(0.0, 1.0), NoisePlan(9), grid);
    for (std::size_t k = 0; k <= grid.steps; ++k)
        EXPECT_EQ(single.state(0, static_cast<std::ptrdiff_t>(k))[0], full.state(0, static_cast<std::ptrdiff_t>(k))[0]);
}

TEST(SolveFrozen, RejectsGridMismatch) {
    const SimGrid grid{0.01, 10, 5};
    const auto cs = mean_field_benchmark();
    const auto wrong = sampled_ensemble(4, 3, SimGrid{0.01, 10, 6}, 1);
    EXPECT_THROW(solve_frozen(wrong, MeasureFlow::frozen(wrong), cs, NoisePlan(1), grid), GridMismatch);
    const auto two_d = sampled_ensemble(4, 3, grid, 2);
    EXPECT_THROW(solve_frozen(two_d, MeasureFlow::frozen(two_d), cs, NoisePlan(1), grid), std::invalid_argument);
}

TEST(PathSet, SegmentViewReproducesPathValues) {
    const SimGrid grid{0.01, 40, 8};
    const auto init = sampled_ensemble(5, 3, grid, 2);
    const auto cs = random_compliant_setup(5, 2, 1, 3, grid).cs;
    const auto p = solve_frozen(init, MeasureFlow::frozen(init), cs, NoisePlan(5), grid);
    for (std::size_t i = 0; i < init.size(); ++i)
        for (std::size_t k = 0; k <= grid.steps; ++k) {
            const auto s = p.segment(i, k);
            EXPECT_EQ(s.intervals(), grid.history_steps);
            for (std::size_t j = 0; j <= grid.history_steps; ++j) {
                const auto t = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(grid.history_steps) +
                               static_cast<std::ptrdiff_t>(j);
                for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(s(j, c), p.state(i, t)[c]);
            }
        }
}

TEST(PathSet, CsvHasHistoryRows) {
    const SimGrid grid{0.5, 2, 2};
    const auto init = Ensemble::replicate(Segment::constant(2, 1, 1.0, 1.5), 1);
    const auto p = solve_frozen(init, MeasureFlow::frozen(init), constant_system(0.0, 0.0), NoisePlan(1), grid);
    std::ostringstream os;
    write_paths_csv(os, p, 6);
    EXPECT_EQ(os.str(), "particle,t,x1\n0,-1,1.5\n0,-0.5,1.5\n0,0,1.5\n0,0.5,1.5\n0,1,1.5\n");
}

TEST(GridRefinement, DeterministicFamilyConvergesAtFirstOrder) {
    // D = 0.3·x(t - r0), b = -x(0), σ = 0, history 1 + θ on [-1, 0], T = 1
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.3));
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(-1.0), scalar_matrix(0.0), Eigen::VectorXd());
    auto s = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.0), scalar_matrix(0.0), d);
    const auto cs = CoefficientSet::assemble(d, b, s);
    std::vector<double> terminal, dts;
    for (std::size_t k : {20u, 40u, 80u, 160u, 320u}) {
        const SimGrid grid{1.0 / static_cast<double>(k), k, k};
        const auto init = Ensemble({linear_history(k, 1.0)});
        const auto p = solve_frozen(init, MeasureFlow::frozen(init), cs, NoisePlan(1), grid);
        terminal.push_back(p.state(0, static_cast<std::ptrdiff_t>(k))[0]);
        dts.push_back(grid.dt);
    }
    // successive differences; least-squares slope of log diff against log dt
    std::vector<double> lx, ly;
    for (std::size_t q = 0; q + 1 < terminal.size(); ++q) {
        lx.push_back(std::log(dts[q]));
        ly.push_back(std::log(std::abs(terminal[q] - terminal[q + 1])));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t q = 0; q < lx.size(); ++q) {
        sxy += (lx[q] - mx) * (ly[q] - my);
        sxx += (lx[q] - mx) * (lx[q] - mx);
    }
    const double order = sxy / sxx;
    EXPECT_GE(order, 0.8);
    for (std::size_t q = 0; q + 2 < terminal.size(); ++q)
        EXPECT_LT(std::abs(terminal[q + 1] - terminal[q + 2]), std::abs(terminal[q] - terminal[q + 1]));
}

TEST(Picard, MeasureIndependentSystemFixesInOneStep) {
    const SimGrid grid{0.01, 50, 10};
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.4));
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(-1.0), scalar_matrix(0.0),
                                                    Eigen::VectorXd::Constant(1, 0.3));
    auto s = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.2), scalar_matrix(0.4), d);
    const auto cs = CoefficientSet::assemble(d, b, s);
    ASSERT_FALSE(cs.measure_dependent());
    const auto init = sampled_ensemble(6, 8, grid, 1);
    const auto r = picard(init, cs, grid, NoisePlan(6), {});
    EXPECT_TRUE(r.diagnostics.converged);
    EXPECT_EQ(r.diagnostics.iterations, 2u);
    EXPECT_EQ(r.diagnostics.stop_metric[1], 0.0);
    EXPECT_EQ(r.diagnostics.d[1], 0.0);
    EXPECT_GT(r.diagnostics.d[0], 0.0);
}

TEST(Picard, MeanFieldBenchmarkContracts) {
    const SimGrid grid{0.01, 50, 10};
    const auto cs = mean_field_benchmark();
    const auto init = sampled_ensemble(7, 64, grid, 1);
    PicardOptions opt;
    opt.max_iter = 8;
    opt.tol = 1e-30;
    const auto r = picard(init, cs, grid, NoisePlan(7), opt);
    EXPECT_FALSE(r.diagnostics.converged);
    EXPECT_EQ(r.diagnostics.iterations, 8u);
    for (std::size_t n = 2; n <= 5; ++n) EXPECT_LE(r.diagnostics.ratio[n], 1.0 / std::numbers::e + 1e-12);
    for (std::size_t n = 1; n < r.diagnostics.stop_metric.size(); ++n)
        EXPECT_LT(r.diagnostics.stop_metric[n], r.diagnostics.stop_metric[n - 1]);
}

TEST(Picard, FixedWindowOverridesSelection) {
    SimGrid grid{0.01, 40, 10};
    grid.t0_window = 0.2;
    const auto init = sampled_ensemble(8, 8, grid, 1);
    const auto r = picard(init, mean_field_benchmark(), grid, NoisePlan(8), {1e-20, 4});
    EXPECT_EQ(r.diagnostics.t0_steps, 20u);
    EXPECT_DOUBLE_EQ(r.diagnostics.t0, 0.2);
    EXPECT_TRUE(std::isnan(r.diagnostics.ratio[0]));
}

TEST(Picard, RejectsBadOptions) {
    const SimGrid grid{0.01, 10, 5};
    const auto init = sampled_ensemble(9, 2, grid, 1);
    EXPECT_THROW(picard(init, mean_field_benchmark(), grid, NoisePlan(1), {0.0, 5}), std::invalid_argument);
    EXPECT_THROW(picard(init, mean_field_benchmark(), grid, NoisePlan(1), {1e-10, 0}), std::invalid_argument);
}

TEST(ContractionWindow, PicksLargestAdmissibleStep) {
    PicardOptions opt;
    // ratios: k=1,2 fine; k=3 one ratio 0.5 > 1/e
    std::vector<std::vector<double>> prof(6, std::vector<double>(4, 0.0));
    for (std::size_t n = 0; n < 6; ++n)
        for (std::size_t k = 1; k < 4; ++k) prof[n][k] = std::pow(0.1, static_cast<double>(n)) * static_cast<double>(k);
    prof[3][3] = 0.5 * prof[2][3];
    EXPECT_EQ(select_contraction_window(prof, opt), 2u);
    prof[3][3] = 0.1 * prof[2][3];
    EXPECT_EQ(select_contraction_window(prof, opt), 3u);
}

TEST(Coupled, IdenticalInputsGiveIdenticalPaths) {
    const SimGrid grid{0.01, 30, 10};
    const auto cs = mean_field_benchmark();
    const auto init = sampled_ensemble(10, 6, grid, 1);
    const auto pp = coupled_simulate(init, init, cs, cs, grid, NoisePlan(3), {1e-20, 6});
    EXPECT_TRUE(*pp.left == *pp.right);
    EXPECT_TRUE(pp.initial_order_holds());
    EXPECT_EQ(pp.seed, 3u);
}

TEST(Coupled, DriftShiftGapGrowsAtMostLinearly) {
    const SimGrid grid{0.01, 50, 10};
    const auto cs = mean_field_benchmark();
    const auto init = sampled_ensemble(11, 8, grid, 1);
    std::vector<double> gaps;
    for (double eps : {0.02, 0.04, 0.08}) {
        const auto bar = cs.with_drift(std::make_shared<ShiftedDrift>(cs.drift, eps));
        const auto pp = coupled_simulate(init, init, cs, bar, grid, NoisePlan(4), {1e-24, 30});
        double gap = 0.0;
        for (std::size_t i = 0; i < init.size(); ++i)
            for (std::size_t k = 0; k <= grid.steps; ++k)
                gap = std::max(gap, std::abs(pp.right->state(i, static_cast<std::ptrdiff_t>(k))[0] -
                                             pp.left->state(i, static_cast<std::ptrdiff_t>(k))[0]));
        gaps.push_back(gap / eps);
    }
    EXPECT_GT(gaps[0], 0.0);
    for (double g : gaps) EXPECT_NEAR(g, gaps[0], 0.05 * gaps[0]);
}
