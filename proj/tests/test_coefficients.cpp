#include <gtest/gtest.h>

#include "nsfde/checks.hpp"
#include "nsfde/experiments.hpp"

using namespace nsfde;

namespace {

DriftPtr scaled_state_drift(double a) {
    return std::make_shared<FunctionDrift>(
        1, [a](double, SegmentView x, const Ensemble&, std::span<double> out) { out[0] = a * x.terminal()[0]; },
        a * a, false, "scaled_state");
}

/// Like the mean-field benchmark but with B ≥ 0, which condition (i) needs once D ≠ 0.
CoefficientSet monotone_benchmark() {
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.5), 0.5);
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(0.2), scalar_matrix(0.8),
                                                    Eigen::VectorXd::Constant(1, 0.2));
    auto s = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.3), scalar_matrix(0.5), d);
    return CoefficientSet::assemble(d, b, s);
}

}  // namespace

TEST(Coefficients, AssembleRejectsDimensionMismatch) {
    auto d = std::make_shared<ZeroNeutral>(2);
    auto b = std::make_shared<MeanFieldLinearDrift>(scalar_matrix(1.0), scalar_matrix(0.0), Eigen::VectorXd());
    auto s = std::make_shared<NeutralAffineDiffusion>(Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1), d);
    try {
        CoefficientSet::assemble(d, b, s);
        FAIL() << "expected invalid_argument";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("b has n=1"), std::string::npos);
    }
}

TEST(Coefficients, MeanFieldDriftEvaluates) {
    Eigen::MatrixXd b(2, 2), c(2, 2);
    b << -1, 0.5, 0, -2;
    c << 0.1, 0, 0, 0.2;
    const MeanFieldLinearDrift drift(b, c, Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(0.5, 0.0), 2.0);
    const Segment x(1, 2, 1.0, {9, 9, 1, 2});
    const Ensemble mu({Segment(1, 2, 1.0, {0, 0, 2, 4}), Segment(1, 2, 1.0, {0, 0, 4, 0})});
    const double t = 0.3;
    const auto v = drift(t, x, mu);
    EXPECT_DOUBLE_EQ(v[0], 1.0 + 0.5 * std::sin(0.6) - 1.0 + 1.0 + 0.1 * 3.0);
    EXPECT_DOUBLE_EQ(v[1], -1.0 - 4.0 + 0.2 * 2.0);
    EXPECT_TRUE(drift.measure_dependent());
    const ShiftedDrift up(std::make_shared<MeanFieldLinearDrift>(drift), 0.25);
    EXPECT_DOUBLE_EQ(up(t, x, mu)[1], v[1] + 0.25);
}

TEST(Coefficients, NeutralAffineDiffusionUsesDCoordinate) {
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.5));
    const NeutralAffineDiffusion s(scalar_matrix(0.3), scalar_matrix(0.5), d);
    const Segment x(2, 1, 1.0, {2.0, 7.0, 3.0});
    const auto v = s(0.0, x, Ensemble({x}));
    EXPECT_DOUBLE_EQ(v[0], 0.3 * (3.0 - 1.0) + 0.5);
}

TEST(CheckA2, Examples) {
    RandomSegmentSampler s(1, 6, 1, 1.0);
    const FunctionDrift constant(1, [](double, SegmentView, const Ensemble&, std::span<double> out) { out[0] = 3.0; },
                                 0.0, false);
    const auto c = check_lipschitz_A2(constant, nullptr, 1.0, s);
    EXPECT_TRUE(c.passed);
    EXPECT_EQ(c.statistic, 0.0);
    EXPECT_TRUE(check_lipschitz_A2(*scaled_state_drift(1.0), nullptr, 1.0, s).passed);
    const auto bad = check_lipschitz_A2(*scaled_state_drift(10.0), nullptr, 1.0, s);
    EXPECT_FALSE(bad.passed);
    EXPECT_GT(bad.statistic, 1.0);
}

TEST(CheckA2, DeclaredConstantOfMeanFieldDriftHolds) {
    RandomSegmentSampler s(2, 6, 2, 1.0);
    Eigen::MatrixXd b(2, 2), c(2, 2);
    b << -1, 0.4, 0.3, -0.7;
    c << 0.5, -0.2, 0.1, 0.9;
    const MeanFieldLinearDrift drift(b, c, Eigen::Vector2d(0.1, 0.2));
    const auto rep = check_lipschitz_A2(drift, &drift, 2.0 * *drift.lipschitz(), s);
    EXPECT_TRUE(rep.passed) << rep.statistic;
}

TEST(CheckA3, Examples) {
    RandomSegmentSampler s(3, 6, 1, 1.0);
    auto d = std::make_shared<LaggedLinearNeutral>(scalar_matrix(0.3));
    const FunctionDiffusion constant(1, 1, [](double, SegmentView, const Ensemble&, std::span<double> out) {
        out[0] = 0.7;
    });
    EXPECT_TRUE(check_A3_structure(constant, *d, 1.0, s).passed);
    const NeutralAffineDiffusion affine(scalar_matrix(0.6), scalar_matrix(0.1), d);
    EXPECT_TRUE(check_A3_structure(affine, *d, 0.36, s).passed);
    const LaggedStateDiffusion lagged(scalar_matrix(2.0), scalar_matrix(0.2));
    const auto rep = check_A3_structure(lagged, *d, 1.0, s);
    EXPECT_FALSE(rep.passed);
    bool b_failed = false;
    for (const auto* leaf : rep.leaves())
        if (leaf->name.rfind("A3(b)", 0) == 0) b_failed = !leaf->passed;
    EXPECT_TRUE(b_failed);
}

TEST(ComparisonConditions, IdenticalSystemsPass) {
    RandomSegmentSampler s(4, 6, 1, 1.0);
    const auto cs = monotone_benchmark();
    const auto rep = check_comparison_conditions(cs, cs, s, {200});
    EXPECT_TRUE(rep.passed);
    for (const auto* leaf : rep.leaves()) EXPECT_TRUE(leaf->passed) << leaf->name;
}

TEST(ComparisonConditions, ShiftedDriftHasPositiveMargin) {
    RandomSegmentSampler s(5, 6, 1, 1.0);
    const auto cs = monotone_benchmark();
    const auto bar = cs.with_drift(std::make_shared<ShiftedDrift>(cs.drift, 0.1));
    const auto rep = check_comparison_conditions(cs, bar, s, {200});
    EXPECT_TRUE(rep.passed);
    for (const auto* leaf : rep.leaves())
        if (leaf->name == "(i) drift order") EXPECT_GE(leaf->statistic, 0.1 - 1e-12);
}

TEST(ComparisonConditions, NegativeDiagonalDriftFailsWithNeutralTerm) {
    // equal D-coordinates with η ≤ η̄ force η(0) ≤ η̄(0), so b = -ξ(0) + … can decrease
    RandomSegmentSampler s(10, 6, 1, 1.0);
    const auto cs = mean_field_benchmark();
    const auto rep = check_comparison_conditions(cs, cs, s, {200});
    for (const auto* leaf : rep.leaves())
        if (leaf->name == "(i) drift order") EXPECT_FALSE(leaf->passed);
}

TEST(ComparisonConditions, NegativeMeanFieldCouplingFails) {
    RandomSegmentSampler s(6, 6, 1, 1.0);
    const auto cs = deterministic_mean_field(scalar_matrix(-1.0), scalar_matrix(-0.5));
    const auto rep = check_comparison_conditions(cs, cs, s, {200});
    EXPECT_FALSE(rep.passed);
    for (const auto* leaf : rep.leaves())
        if (leaf->name == "(i) drift order") {
            EXPECT_FALSE(leaf->passed);
            EXPECT_LT(leaf->statistic, 0.0);
        }
}

TEST(ComparisonConditions, DifferentDiffusionFailsConditionTwo) {
    RandomSegmentSampler s(7, 6, 1, 1.0);
    const auto cs = mean_field_benchmark();
    auto bar = cs;
    bar.diffusion = std::make_shared<NeutralAffineDiffusion>(scalar_matrix(0.3), scalar_matrix(0.6), cs.neutral);
    const auto rep = check_comparison_conditions(cs, bar, s, {100});
    for (const auto* leaf : rep.leaves())
        if (leaf->name == "(ii) sigma equals sigma_bar") EXPECT_FALSE(leaf->passed);
}

TEST(Assumptions, BuiltinSystemsPassSelfConsistencyGate) {
    const std::vector<CoefficientSet> systems{mean_field_benchmark(), pure_neutral_family(0.4),
                                              deterministic_mean_field(scalar_matrix(-1.0), scalar_matrix(0.5))};
    for (const auto& cs : systems) {
        RandomSegmentSampler s(8, 8, cs.dim(), 0.5);
        const auto rep = check_assumptions(cs, s, {1000});
        for (const auto* leaf : rep.leaves()) EXPECT_TRUE(leaf->passed) << cs.drift->name() << ": " << leaf->name;
    }
}

TEST(Assumptions, RandomCompliantSetupsPass) {
    const SimGrid grid{0.01, 10, 10};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto setup = random_compliant_setup(seed, 2, 2, 4, grid);
        RandomSegmentSampler s(seed, grid.history_steps, 2, grid.r0());
        EXPECT_TRUE(check_comparison_conditions(setup.cs, setup.cs_bar, s, {200}).passed) << setup.description;
        EXPECT_TRUE(check_assumptions(setup.cs, s, {200}).passed) << setup.description;
    }
}

TEST(RecordA4, MeasuresGrowthAtOrigin) {
    RandomSegmentSampler s(9, 4, 1, 1.0);
    const auto rep = record_A4(mean_field_benchmark(), s, {50});
    // |b(0,δ0)|² = 0.2², |σ(0)|² = 0.5²
    EXPECT_NEAR(rep.statistic, 0.04 + 0.25, 1e-14);
    EXPECT_TRUE(rep.passed);
}
