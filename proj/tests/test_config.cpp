#include <gtest/gtest.h>

#include "nsfde/config.hpp"
#include "nsfde/wasserstein.hpp"

using namespace nsfde;

namespace {

const char* kFull = R"([grid]
dt = 0.01
steps = 20
K = 10
N = 4
seed = 7

[system]
n = 2
m = 1
neutral = lagged_linear
A = 0.2,0.1;0,0.3
drift = mean_field_linear
B = -1,0;0,-1
C = 0.1,0;0,0.1
g0 = 0.1,0.2
diffusion = neutral_affine
s = 0.3;0.2
c = 0.5;0.5

[system_bar]
n = 2
m = 1
neutral = lagged_linear
A = 0.2,0.1;0,0.3
drift = mean_field_linear
B = -1,0;0,-1
C = 0.1,0;0,0.1
g0 = 0.1,0.2
eps = 0.05
diffusion = neutral_affine
s = 0.3;0.2
c = 0.5;0.5

[initial]
kind = constant
value = 1,2

[initial_bar]
kind = shift
shift = 0.1

[run]
tol = 1e-18
max_iter = 12
eps = 0.1,0.05
t0 = 0.05

[output]
directory = out_dir
precision = 10
)";

std::string expect_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto p = s.find(from);
    EXPECT_NE(p, std::string::npos) << from;
    return s.replace(p, from.size(), to);
}

}  // namespace

TEST(Config, ParsesFullExample) {
    const auto cfg = parse_config(kFull);
    ASSERT_TRUE(cfg.grid && cfg.system && cfg.system_bar && cfg.initial && cfg.initial_bar);
    EXPECT_EQ(cfg.grid->grid.steps, 20u);
    EXPECT_EQ(cfg.grid->grid.history_steps, 10u);
    EXPECT_DOUBLE_EQ(cfg.grid->grid.t0_window, 0.05);
    EXPECT_EQ(cfg.grid->seed, 7u);
    EXPECT_EQ(cfg.system->a(0, 1), 0.1);
    EXPECT_EQ(cfg.system->s(1, 0), 0.2);
    EXPECT_EQ(cfg.system_bar->eps, 0.05);
    EXPECT_EQ(cfg.run.max_iter, 12u);
    ASSERT_EQ(cfg.run.eps.size(), 2u);
    EXPECT_EQ(cfg.output_directory, "out_dir");
    EXPECT_EQ(cfg.precision, 10);
}

TEST(Config, BuildsCoefficientsAndInitials) {
    const auto cfg = parse_config(kFull);
    const auto cs = build_coefficients(*cfg.system, "system");
    const auto bar = build_coefficients(*cfg.system_bar, "system_bar");
    EXPECT_EQ(cs.dim(), 2u);
    EXPECT_EQ(cs.noise_dim(), 1u);
    EXPECT_NEAR(cs.neutral->kappa(), std::max(0.3, detail::spectral_norm(cfg.system->a)), 1e-12);
    const Segment z(10, 2, 0.1);
    const Ensemble mu({z});
    EXPECT_NEAR(bar.drift->operator()(0.0, z, mu)[0] - cs.drift->operator()(0.0, z, mu)[0], 0.05, 1e-15);
    const auto xi = build_initial(*cfg.initial, "initial", *cfg.grid, 2, 1);
    const auto xi_bar = build_initial(*cfg.initial_bar, "initial_bar", *cfg.grid, 2, 2, &xi);
    EXPECT_EQ(xi.size(), 4u);
    EXPECT_DOUBLE_EQ(xi_bar[3].terminal()[1], 2.1);
}

TEST(Config, SampledInitialIsSeeded) {
    auto text = replace(kFull, "kind = constant\nvalue = 1,2", "kind = sampled\namplitude = 0.5");
    const auto cfg = parse_config(text);
    const auto a = build_initial(*cfg.initial, "initial", *cfg.grid, 2, 1);
    const auto b = build_initial(*cfg.initial, "initial", *cfg.grid, 2, 1);
    const auto c = build_initial(*cfg.initial, "initial", *cfg.grid, 2, 2);
    EXPECT_EQ(w2(a, b), 0.0);
    EXPECT_GT(w2(a, c), 0.0);
}

TEST(Config, UnknownKeyNamesItsPath) {
    const auto msg = expect_error(replace(kFull, "seed = 7", "seed = 7\nseeed = 8"));
    EXPECT_NE(msg.find("grid.seeed"), std::string::npos) << msg;
    EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
    EXPECT_NE(expect_error(std::string(kFull) + "\n[extra]\nx = 1\n").find("extra"), std::string::npos);
}

TEST(Config, MissingKeyNamesItsPath) {
    const auto msg = expect_error(replace(kFull, "K = 10\n", ""));
    EXPECT_NE(msg.find("grid.K"), std::string::npos) << msg;
}

TEST(Config, DimensionMismatchNamesItsPath) {
    auto msg = expect_error(replace(kFull, "A = 0.2,0.1;0,0.3\ndrift", "A = 0.2,0.1\ndrift"));
    EXPECT_NE(msg.find("system.A"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expected a 2x2"), std::string::npos) << msg;
    msg = expect_error(replace(kFull, "g0 = 0.1,0.2\ndiffusion", "g0 = 0.1\ndiffusion"));
    EXPECT_NE(msg.find("system.g0"), std::string::npos) << msg;
    msg = expect_error(replace(replace(kFull, "n = 2\nm = 1\nneutral = lagged_linear\nA = 0.2,0.1;0,0.3\ndrift = mean_field_linear\nB = -1,0;0,-1\nC = 0.1,0;0,0.1\ng0 = 0.1,0.2\neps",
                                       "n = 1\nm = 1\nneutral = lagged_linear\nA = 0.2\ndrift = mean_field_linear\nB = -1\nC = 0.1\ng0 = 0.1\neps"),
                               "s = 0.3;0.2\nc = 0.5;0.5\n\n[initial]", "s = 0.3\nc = 0.5\n\n[initial]"));
    EXPECT_NE(msg.find("system_bar.n"), std::string::npos) << msg;
}

TEST(Config, RejectsBadValues) {
    EXPECT_NE(expect_error(replace(kFull, "dt = 0.01", "dt = -1")).find("grid.dt"), std::string::npos);
    EXPECT_NE(expect_error(replace(kFull, "steps = 20", "steps = 2x")).find("grid.steps"), std::string::npos);
    EXPECT_NE(expect_error(replace(kFull, "neutral = lagged_linear", "neutral = cubic")).find("system.neutral"),
              std::string::npos);
    EXPECT_NE(expect_error(replace(kFull, "precision = 10", "precision = 30")).find("output.precision"),
              std::string::npos);
    EXPECT_NE(expect_error(replace(kFull, "kind = constant\nvalue = 1,2", "kind = shift\nshift = 1"))
                  .find("initial.kind"),
              std::string::npos);
    EXPECT_NE(expect_error(replace(kFull, "kind = constant\nvalue = 1,2", "kind = constant\nvalue = 1,2\namplitude = 2"))
                  .find("initial.amplitude"),
              std::string::npos);
    EXPECT_NE(expect_error("[grid\ndt = 1").find("config syntax"), std::string::npos);
}

TEST(Config, ConstructorErrorsBecomeConfigErrors) {
    const auto cfg = parse_config(replace(kFull, "A = 0.2,0.1;0,0.3\ndrift", "A = 0.9,0.5;0,0.3\ndrift"));
    try {
        build_coefficients(*cfg.system, "system");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("system: ", 0), 0u) << e.what();
    }
}

TEST(Config, ConstantInitialLengthChecked) {
    const auto cfg = parse_config(kFull);
    InitialConfig bad = *cfg.initial;
    bad.value = {1.0};
    EXPECT_THROW(build_initial(bad, "initial", *cfg.grid, 2, 1), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/file.ini"), ConfigError);
}
