#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "nsfde.hpp"

namespace fs = std::filesystem;
using namespace nsfde;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_verdict = 1;
constexpr int exit_config = 2;

struct Context {
    std::string command;
    ExperimentConfig cfg;
    fs::path out;

    std::ofstream open(const std::string& name) const {
        std::ofstream f(out / name);
        if (!f) throw std::runtime_error("cannot write " + (out / name).string());
        return f;
    }
};

const GridConfig& need_grid(const ExperimentConfig& c) {
    if (!c.grid) throw ConfigError("grid: section is required for this command");
    return *c.grid;
}

const SystemConfig& need_system(const ExperimentConfig& c) {
    if (!c.system) throw ConfigError("system: section is required for this command");
    return *c.system;
}

CoefficientSet left_system(const ExperimentConfig& c) { return build_coefficients(need_system(c), "system"); }

CoefficientSet right_system(const ExperimentConfig& c) {
    return c.system_bar ? build_coefficients(*c.system_bar, "system_bar") : left_system(c);
}

Ensemble left_initial(const ExperimentConfig& c) {
    if (!c.initial) throw ConfigError("initial: section is required for this command");
    return build_initial(*c.initial, "initial", need_grid(c), need_system(c).n, 1);
}

Ensemble right_initial(const ExperimentConfig& c, const Ensemble& left) {
    if (!c.initial_bar) return left;
    return build_initial(*c.initial_bar, "initial_bar", need_grid(c), need_system(c).n, 2, &left);
}

PicardOptions picard_options(const ExperimentConfig& c) {
    PicardOptions o;
    o.tol = c.run.tol;
    o.max_iter = c.run.max_iter;
    return o;
}

void write_manifest(const Context& ctx) {
    auto f = ctx.open("manifest.txt");
    f << "library_version=" << library_version << '\n';
    f << "command=" << ctx.command << '\n';
    f << "seed=" << (ctx.cfg.grid ? std::to_string(ctx.cfg.grid->seed) : std::string("none")) << '\n';
    f << "precision=" << ctx.cfg.precision << '\n';
    f << "--- config ---\n" << ctx.cfg.source;
    if (!ctx.cfg.source.empty() && ctx.cfg.source.back() != '\n') f << '\n';
}

void report_picard(const PicardDiagnostics& d, const std::string& label) {
    std::cout << label << ": iterations=" << d.iterations << " converged=" << (d.converged ? "yes" : "no")
              << " final_distance=" << d.final_distance << " t0=" << d.t0 << '\n';
}

int cmd_simulate(const Context& ctx) {
    const auto& g = need_grid(ctx.cfg);
    const auto cs = left_system(ctx.cfg);
    const auto xi = left_initial(ctx.cfg);
    const auto res = picard(xi, cs, g.grid, NoisePlan(g.seed), picard_options(ctx.cfg));
    auto paths = ctx.open("paths.csv");
    write_paths_csv(paths, *res.paths, ctx.cfg.precision);
    auto flow = ctx.open("flow_summary.csv");
    write_flow_summary_csv(flow, *res.paths, ctx.cfg.precision);
    report_picard(res.diagnostics, "simulate");
    return res.diagnostics.converged ? exit_ok : exit_verdict;
}

int cmd_picard(const Context& ctx) {
    const auto& g = need_grid(ctx.cfg);
    const auto cs = left_system(ctx.cfg);
    const auto xi = left_initial(ctx.cfg);
    const auto res = picard(xi, cs, g.grid, NoisePlan(g.seed), picard_options(ctx.cfg));
    auto diag = ctx.open("diagnostics.csv");
    write_diagnostics_csv(diag, res.diagnostics, ctx.cfg.precision);
    auto prof = ctx.open("profiles.csv");
    csv::Writer w(prof, ctx.cfg.precision);
    w.header({"n", "t", "mean_sup_sq_diff"});
    for (std::size_t n = 0; n < res.diagnostics.profiles.size(); ++n)
        for (std::size_t k = 0; k < res.diagnostics.profiles[n].size(); ++k)
            w.row(n, g.grid.time(k), res.diagnostics.profiles[n][k]);
    auto paths = ctx.open("paths.csv");
    write_paths_csv(paths, *res.paths, ctx.cfg.precision);
    report_picard(res.diagnostics, "picard");
    for (std::size_t n = 1; n < res.diagnostics.ratio.size(); ++n)
        std::cout << "  d_" << n << "/d_" << n - 1 << " = " << res.diagnostics.ratio[n] << '\n';
    return res.diagnostics.converged ? exit_ok : exit_verdict;
}

int cmd_compare(const Context& ctx) {
    const auto& g = need_grid(ctx.cfg);
    const auto cs = left_system(ctx.cfg);
    const auto cs_bar = right_system(ctx.cfg);
    const auto xi = left_initial(ctx.cfg);
    const auto xi_bar = right_initial(ctx.cfg, xi);
    const auto pp = coupled_simulate(xi, xi_bar, cs, cs_bar, g.grid, NoisePlan(g.seed), picard_options(ctx.cfg));
    const auto verdict = order_report(pp, *cs.neutral, ctx.cfg.run.slack, ctx.cfg.run.bins);
    const auto crossings = crossing_times(pp, *cs.neutral, ctx.cfg.run.slack);
    const auto upsilon = check_upsilon_leq_rho(crossings);
    const auto loc = localize_violation(pp, cs, cs_bar, crossings, ctx.cfg.run.localize_tol);

    auto v = ctx.open("verdict.csv");
    write_verdict_csv(v, verdict, upsilon, ctx.cfg.precision);
    auto h = ctx.open("histogram.csv");
    write_histogram_csv(h, verdict, ctx.cfg.precision);
    auto c = ctx.open("crossings.csv");
    write_crossings_csv(c, crossings, ctx.cfg.precision);
    auto d = ctx.open("diagnosis.csv");
    write_diagnosis_csv(d, loc, ctx.cfg.precision);

    std::cout << "compare: applicable=" << (verdict.applicable ? "yes" : "no") << " violating_pairs="
              << verdict.violating_pairs << "/" << verdict.pairs << " max_violation=" << verdict.max_violation
              << " upsilon_leq_rho=" << (upsilon.passed ? "yes" : "no") << " touch_events=" << loc.events.size()
              << " flagged_i=" << loc.flagged(Condition::Drift) << " flagged_ii=" << loc.flagged(Condition::Diffusion)
              << '\n';
    return verdict.preserved() && upsilon.passed ? exit_ok : exit_verdict;
}

int cmd_check(const Context& ctx) {
    const std::uint64_t seed = ctx.cfg.grid ? ctx.cfg.grid->seed : 0;
    const auto cs = left_system(ctx.cfg);
    const auto& sys = need_system(ctx.cfg);
    const std::size_t k = ctx.cfg.grid ? ctx.cfg.grid->grid.history_steps : 20;
    const double r0 = ctx.cfg.grid ? ctx.cfg.grid->grid.r0() : 1.0;
    CheckOptions opt;
    opt.trials = ctx.cfg.run.trials;

    auto f = ctx.open("report.csv");
    csv::Writer(f, ctx.cfg.precision).header({"system", "check", "result", "statistic", "threshold", "samples", "violations"});
    bool ok = true;
    auto run = [&](const CheckReport& rep, const std::string& label) {
        write_report_csv(f, rep, label, ctx.cfg.precision);
        for (const auto* leaf : rep.leaves())
            std::cout << label << ": " << leaf->name << " " << (leaf->passed ? "pass" : "FAIL") << " (statistic "
                      << leaf->statistic << ", " << leaf->violations << "/" << leaf->samples << ")\n";
        ok = ok && rep.passed;
    };
    RandomSegmentSampler s(seed, k, sys.n, r0);
    run(check_assumptions(cs, s, opt), "system");
    if (ctx.cfg.system_bar) {
        const auto cs_bar = right_system(ctx.cfg);
        run(check_assumptions(cs_bar, s, opt), "system_bar");
        run(check_comparison_conditions(cs, cs_bar, s, opt), "comparison");
    }
    return ok ? exit_ok : exit_verdict;
}

Ensemble read_ensemble_file(const std::string& path, const std::string& key) {
    if (path.empty()) throw ConfigError(key + ": required key is missing");
    std::ifstream in(path);
    if (!in) throw ConfigError(key + ": cannot open '" + path + "'");
    try {
        return read_ensemble_csv(in);
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

int cmd_wasserstein(const Context& ctx) {
    const auto mu = read_ensemble_file(ctx.cfg.run.left_ensemble, "run.left_ensemble");
    const auto nu = read_ensemble_file(ctx.cfg.run.right_ensemble, "run.right_ensemble");
    if (!same_grid(mu[0], nu[0]) || mu.size() != nu.size())
        throw ConfigError("run.right_ensemble: must match run.left_ensemble in N, n and grid");
    const auto res = w2_with_coupling(mu, nu);
    auto f = ctx.open("wasserstein.csv");
    csv::Writer w(f, ctx.cfg.precision);
    if (ctx.cfg.system) {
        const auto cs = left_system(ctx.cfg);
        if (cs.dim() != mu.dim()) throw ConfigError("system.n: does not match the ensemble files");
        const bool ordered = stochastic_leq_D(mu, nu, *cs.neutral).has_value();
        w.header({"w2", "stochastic_leq_D"});
        w.row(res.distance, ordered ? 1 : 0);
        std::cout << "wasserstein: w2=" << res.distance << " stochastic_leq_D=" << (ordered ? "yes" : "no") << '\n';
    } else {
        w.header({"w2"});
        w.row(res.distance);
        std::cout << "wasserstein: w2=" << res.distance << '\n';
    }
    auto c = ctx.open("coupling.csv");
    csv::Writer cw(c, ctx.cfg.precision);
    cw.header({"left", "right"});
    for (std::size_t i = 0; i < res.coupling.size(); ++i) cw.row(i, res.coupling[i]);
    return exit_ok;
}

int cmd_falsify(const Context& ctx) {
    const auto& g = need_grid(ctx.cfg);
    const auto& sys = need_system(ctx.cfg);
    CheckOptions opt;
    opt.trials = 200;
    auto f = ctx.open("falsify.csv");
    csv::Writer w(f, ctx.cfg.precision);
    w.header({"trial", "conditions_pass", "violating_pairs", "fraction", "upsilon_leq_rho", "touch_events",
              "flagged_i", "flagged_ii", "description"});
    auto dfile = ctx.open("diagnosis.csv");
    csv::Writer dw(dfile, ctx.cfg.precision);
    dw.header({"trial", "pair", "component", "noise_index", "step", "t", "condition", "left", "right"});

    bool sound = true;
    std::size_t violating_configs = 0;
    for (std::size_t trial = 0; trial < ctx.cfg.run.trials; ++trial) {
        const auto seed = NoisePlan(g.seed).derived(100 + trial).seed();
        auto setup = random_fuzz_setup(seed, sys.n, sys.m, g.particles, g.grid);
        RandomSegmentSampler s(seed, g.grid.history_steps, sys.n, g.grid.r0());
        const bool compliant = check_comparison_conditions(setup.cs, setup.cs_bar, s, opt).passed;
        const auto pp = coupled_simulate(setup.xi, setup.xi_bar, setup.cs, setup.cs_bar, g.grid, NoisePlan(seed),
                                         picard_options(ctx.cfg));
        const auto verdict = order_report(pp, *setup.cs.neutral, ctx.cfg.run.slack, ctx.cfg.run.bins);
        const auto crossings = crossing_times(pp, *setup.cs.neutral, ctx.cfg.run.slack);
        const auto upsilon = check_upsilon_leq_rho(crossings);
        const auto loc = localize_violation(pp, setup.cs, setup.cs_bar, crossings, ctx.cfg.run.localize_tol);
        w.row(trial, compliant ? 1 : 0, verdict.violating_pairs, verdict.fraction(), upsilon.passed ? 1 : 0,
              loc.events.size(), loc.flagged(Condition::Drift), loc.flagged(Condition::Diffusion),
              '"' + setup.description + '"');
        for (const auto& d : loc.diagnoses)
            dw.row(trial, d.pair, d.component + 1, d.condition == Condition::Drift ? 0 : d.noise_index + 1, d.step,
                   d.time, d.condition == Condition::Drift ? "(i)" : "(ii)", d.left_value, d.right_value);
        if (verdict.violating_pairs > 0) ++violating_configs;
        // a violation under verified conditions, or Υ > ρ, contradicts the theory
        if ((compliant && verdict.violating_pairs > 0) || !upsilon.passed) sound = false;
    }
    std::cout << "falsify: trials=" << ctx.cfg.run.trials << " violating_configs=" << violating_configs
              << " consistent=" << (sound ? "yes" : "no") << '\n';
    return sound ? exit_ok : exit_verdict;
}

int cmd_shift(const Context& ctx) {
    const auto& g = need_grid(ctx.cfg);
    if (ctx.cfg.run.eps.empty()) throw ConfigError("run.eps: required for shift");
    const auto cs_bar = right_system(ctx.cfg);
    const auto xi = left_initial(ctx.cfg);
    const auto xi_bar = right_initial(ctx.cfg, xi);
    ShiftExperiment ex;
    try {
        ex = epsilon_shift_experiment(xi_bar, cs_bar, ctx.cfg.run.eps, g.grid, NoisePlan(g.seed),
                                      picard_options(ctx.cfg));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("run.eps: ") + e.what());
    }
    auto f = ctx.open("shift.csv");
    write_shift_csv(f, ex, ctx.cfg.precision);
    for (const auto& r : ex.rows) std::cout << "shift: eps=" << r.eps << " distance=" << r.distance << '\n';
    return ex.nonincreasing(1e-12) ? exit_ok : exit_verdict;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distribution-dependent neutral SFDE experiments"};
    app.require_subcommand(1, 1);
    std::string config_path;
    const std::map<std::string, std::pair<std::string, int (*)(const Context&)>> commands{
        {"simulate", {"Solve one system by Picard iteration and write paths", cmd_simulate}},
        {"picard", {"Picard iteration with contraction diagnostics", cmd_picard}},
        {"compare", {"Coupled simulation with order verdict and violation localization", cmd_compare}},
        {"check", {"Sampling checks of the neutral, Lipschitz and comparison conditions", cmd_check}},
        {"wasserstein", {"Exact W2 between two ensemble files", cmd_wasserstein}},
        {"falsify", {"Fuzz configurations and localize order violations", cmd_falsify}},
        {"shift", {"Drift-shift stability experiment", cmd_shift}},
    };
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("config", config_path, "INI configuration file")->required();
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    Context ctx;
    ctx.command = command;
    try {
        ctx.cfg = load_config(config_path);
        // ensemble files are looked up next to the config
        const auto base = fs::path(config_path).parent_path();
        for (auto* f : {&ctx.cfg.run.left_ensemble, &ctx.cfg.run.right_ensemble})
            if (!f->empty() && fs::path(*f).is_relative()) *f = (base / *f).string();
        ctx.out = ctx.cfg.output_directory;
        if (const char* env = std::getenv("NSFDE_OUTPUT_DIR"); env && *env) ctx.out = env;
        fs::create_directories(ctx.out);
        write_manifest(ctx);
        return commands.at(command).second(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const GridMismatch& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_verdict;
    }
}
