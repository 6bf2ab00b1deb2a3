#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "nsfde/assignment.hpp"
#include "nsfde/sampler.hpp"
#include "nsfde/wasserstein.hpp"

using namespace nsfde;

namespace {

Ensemble ens1(std::initializer_list<double> constants) {
    std::vector<Segment> m;
    for (double c : constants) m.push_back(Segment::constant(3, 1, 1.0, c));
    return Ensemble(std::move(m));
}

Ensemble permuted(const Ensemble& mu, std::mt19937_64& rng) {
    auto m = mu.members();
    std::shuffle(m.begin(), m.end(), rng);
    return Ensemble(std::move(m));
}

}  // namespace

TEST(Ensemble, Validation) {
    EXPECT_THROW(Ensemble(std::vector<Segment>{}), std::invalid_argument);
    EXPECT_THROW(Ensemble({Segment(3, 1, 1.0), Segment(4, 1, 1.0)}), GridMismatch);
    const auto mu = ens1({1.0, 3.0});
    EXPECT_DOUBLE_EQ(mu.terminal_mean()[0], 2.0);
}

TEST(SecondMoment, Examples) {
    EXPECT_EQ(second_moment(Ensemble::replicate(Segment(3, 2, 1.0), 4)), 0.0);
    EXPECT_DOUBLE_EQ(second_moment(ens1({-2.5})), 6.25);
    EXPECT_DOUBLE_EQ(second_moment(ens1({1.0, -3.0})), 5.0);
}

TEST(Ensemble, CsvRoundTrip) {
    RandomSegmentSampler s(1, 6, 2, 0.5);
    const auto mu = s.ensemble(5);
    std::stringstream ss;
    write_ensemble_csv(ss, mu);
    const auto nu = read_ensemble_csv(ss);
    ASSERT_EQ(nu.size(), mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k)
        for (std::size_t q = 0; q < mu[k].values().size(); ++q) EXPECT_EQ(mu[k].values()[q], nu[k].values()[q]);
    EXPECT_EQ(w2(mu, nu), 0.0);
}

TEST(Assignment, KnownOptimum) {
    CostMatrix c(3);
    const double v[3][3] = {{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) c(i, j) = v[i][j];
    const auto a = solve_assignment(c);
    EXPECT_TRUE(is_permutation_of_iota(a));
    EXPECT_DOUBLE_EQ(assignment_cost(c, a), 5.0);
}

TEST(Assignment, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 7;
        CostMatrix c(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) = u(rng);
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        double best = std::numeric_limits<double>::infinity();
        do best = std::min(best, assignment_cost(c, p));
        while (std::next_permutation(p.begin(), p.end()));
        EXPECT_NEAR(assignment_cost(c, solve_assignment(c)), best, 1e-12);
    }
}

TEST(PerfectMatching, FeasibleAndInfeasible) {
    BipartiteGraph g(3);
    g.set(0, 1, true);
    g.set(1, 0, true);
    g.set(2, 2, true);
    const auto m = perfect_matching(g);
    ASSERT_TRUE(m.has_value());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(g((i), (*m)[i]));
    BipartiteGraph h(2);
    h.set(0, 0, true);
    h.set(1, 0, true);
    EXPECT_FALSE(perfect_matching(h).has_value());
}

TEST(W2, Examples) {
    RandomSegmentSampler s(3, 5, 2, 1.0);
    const auto mu = s.ensemble(6);
    EXPECT_EQ(w2(mu, mu), 0.0);
    const auto xi = s.segment();
    const auto eta = s.segment();
    EXPECT_DOUBLE_EQ(w2(Ensemble({xi}), Ensemble({eta})), sup_distance(xi, eta));
    EXPECT_THROW(w2(mu, s.ensemble(5)), std::invalid_argument);
}

TEST(W2, CrossOptimalPairing) {
    const auto mu = ens1({0.0, 10.0});
    const auto nu = ens1({10.0, 1.0});
    // identity pairing costs (100 + 81)/2, crossed pairing (1 + 0)/2
    EXPECT_DOUBLE_EQ(w2_bruteforce(mu, nu), std::sqrt(0.5));
    EXPECT_DOUBLE_EQ(w2(mu, nu), std::sqrt(0.5));
}

TEST(W2, EqualsBruteForce) {
    RandomSegmentSampler s(4, 4, 2, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 5;
        const auto mu = s.ensemble(n);
        const auto nu = s.ensemble(n);
        EXPECT_NEAR(w2(mu, nu), w2_bruteforce(mu, nu), 1e-12);
    }
    EXPECT_THROW(w2_bruteforce(s.ensemble(9), s.ensemble(9)), std::invalid_argument);
}

TEST(W2, MetricAxioms) {
    RandomSegmentSampler s(5, 4, 2, 1.0);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = s.ensemble(16);
        const auto b = s.ensemble(16);
        const auto c = s.ensemble(16);
        EXPECT_EQ(w2(a, b), w2(b, a));
        EXPECT_LE(w2(a, c), w2(a, b) + w2(b, c) + 1e-10);
        EXPECT_EQ(w2(a, permuted(a, rng)), 0.0);
        EXPECT_GT(w2(a, b), 0.0);
    }
}

TEST(W2, AlignedCouplingIsUpperBound) {
    RandomSegmentSampler s(6, 4, 1, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = s.ensemble(10);
        const auto b = s.ensemble(10);
        EXPECT_LE(w2(a, b), aligned_coupling_distance(a, b) + 1e-15);
    }
}

TEST(StochasticLeqD, Examples) {
    const LaggedLinearNeutral d(Eigen::MatrixXd::Constant(1, 1, 0.5));
    RandomSegmentSampler s(7, 5, 1, 1.0);
    const auto mu = s.ensemble(8);
    const auto self = stochastic_leq_D(mu, mu, d);
    ASSERT_TRUE(self.has_value());

    std::vector<Segment> up;
    for (const auto& m : mu) up.push_back(shifted(m, 0.3));
    const auto witness = stochastic_leq_D(mu, Ensemble(up), d);
    ASSERT_TRUE(witness.has_value());
    for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_TRUE(leq_D(mu[i], up[(*witness)[i]], d));

    // members pairwise cross: no admissible edge at all
    const Ensemble a({Segment(1, 1, 1.0, {0.0, 1.0}), Segment(1, 1, 1.0, {0.0, 1.0})});
    const Ensemble b({Segment(1, 1, 1.0, {1.0, 0.0}), Segment(1, 1, 1.0, {1.0, 0.0})});
    EXPECT_FALSE(stochastic_leq_D(a, b, d).has_value());
    EXPECT_THROW(stochastic_leq_D(mu, s.ensemble(3), d), std::invalid_argument);
}

TEST(StochasticLeqD, WitnessIsAPermutationAfterShuffle) {
    const LaggedLinearNeutral d(Eigen::MatrixXd::Constant(2, 2, 0.2));
    RandomSegmentSampler s(8, 5, 2, 1.0);
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto mu = s.ensemble(12);
        std::vector<Segment> up;
        for (const auto& m : mu) up.push_back(shifted(m, s.uniform(0.0, 1.0)));
        const auto nu = permuted(Ensemble(up), rng);
        const auto w = stochastic_leq_D(mu, nu, d);
        ASSERT_TRUE(w.has_value());
        EXPECT_TRUE(is_permutation_of_iota(*w));
    }
}

TEST(StochasticLeqD, Transitive) {
    const AveragedLinearNeutral d(Eigen::MatrixXd::Constant(1, 1, 0.4));
    RandomSegmentSampler s(9, 5, 1, 1.0);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const auto mu = s.ensemble(10);
        std::vector<Segment> m1, m2;
        for (const auto& m : mu) m1.push_back(shifted(m, s.uniform(0.0, 0.5)));
        const auto nu = permuted(Ensemble(m1), rng);
        for (const auto& m : nu) m2.push_back(shifted(m, s.uniform(0.0, 0.5)));
        const auto rho = permuted(Ensemble(m2), rng);
        const auto ab = stochastic_leq_D(mu, nu, d);
        const auto bc = stochastic_leq_D(nu, rho, d);
        ASSERT_TRUE(ab && bc);
        // the composed matching is itself a witness
        for (std::size_t i = 0; i < mu.size(); ++i) EXPECT_TRUE(leq_D(mu[i], rho[(*bc)[(*ab)[i]]], d));
        EXPECT_TRUE(stochastic_leq_D(mu, rho, d).has_value());
    }
}
