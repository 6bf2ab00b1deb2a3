#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <Eigen/Dense>

#include "nsfde/coefficients.hpp"
#include "nsfde/csv.hpp"
#include "nsfde/ensemble.hpp"
#include "nsfde/experiments.hpp"
#include "nsfde/solver.hpp"

namespace nsfde {

inline constexpr const char* library_version = "0.1.0";

/// Bad or missing configuration; the message names the offending key path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridConfig {
    SimGrid grid;
    std::size_t particles = 0;
    std::uint64_t seed = 0;
};

struct SystemConfig {
    std::size_t n = 1, m = 1;
    std::string neutral, drift, diffusion;
    Eigen::MatrixXd a, b, c, s, sc;
    std::optional<double> kappa;
    Eigen::VectorXd g0, g1;
    double omega = 0.0, eps = 0.0;
};

struct InitialConfig {
    std::string kind;  ///< constant | sampled | shift
    std::vector<double> value;
    double amplitude = 1.0;
    double shift = 0.0;
};

struct RunConfig {
    double tol = 1e-20;
    std::size_t max_iter = 50;
    double slack = 1e-9;
    double localize_tol = 1e-9;
    std::vector<double> eps;
    std::size_t trials = 200;
    std::size_t bins = 20;
    double t0 = 0.0;
    std::string left_ensemble, right_ensemble;
};

struct ExperimentConfig {
    std::optional<GridConfig> grid;
    std::optional<SystemConfig> system, system_bar;
    std::optional<InitialConfig> initial, initial_bar;
    RunConfig run;
    std::string output_directory = "nsfde_out";
    int precision = 17;
    std::string source;  ///< raw text, echoed into the manifest
};

namespace config_detail {

using boost::property_tree::ptree;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& text, const std::string& key) {
    try {
        return csv::to_double(trim(text));
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    }
}

inline std::uint64_t parse_unsigned(const std::string& text, const std::string& key) {
    const auto t = trim(text);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty())
        throw ConfigError(key + ": expected a nonnegative integer, got '" + text + "'");
    return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    for (auto f : csv::split(text, ',')) out.push_back(parse_real(std::string(f), key));
    return out;
}

/// "a,b;c,d" is a 2x2 matrix, rows separated by ';'.
inline Eigen::MatrixXd parse_matrix(const std::string& text, const std::string& key) {
    std::vector<std::vector<double>> rows;
    for (auto r : csv::split(text, ';')) rows.push_back(parse_list(std::string(r), key));
    const auto cols = rows.front().size();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw ConfigError(key + ": ragged matrix rows");
        for (std::size_t j = 0; j < cols; ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return a;
}

/// Section reader that records which keys were consumed.
class Section {
public:
    Section(const ptree& tree, std::string name, std::set<std::string> allowed)
        : tree_(tree), name_(std::move(name)) {
        for (const auto& [k, v] : tree_) {
            if (!v.empty()) throw ConfigError(name_ + "." + k + ": nested keys are not allowed");
            if (!allowed.count(k)) throw ConfigError(name_ + "." + k + ": unknown key");
        }
    }

    std::string path(const std::string& key) const { return name_ + "." + key; }
    bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

    std::string text(const std::string& key) const {
        if (!has(key)) throw ConfigError(path(key) + ": required key is missing");
        return trim(tree_.get<std::string>(key));
    }
    std::string text_or(const std::string& key, std::string def) const { return has(key) ? text(key) : def; }
    double real(const std::string& key) const { return parse_real(text(key), path(key)); }
    double real_or(const std::string& key, double def) const { return has(key) ? real(key) : def; }
    std::uint64_t count(const std::string& key) const { return parse_unsigned(text(key), path(key)); }
    std::uint64_t count_or(const std::string& key, std::uint64_t def) const {
        return has(key) ? count(key) : def;
    }
    std::vector<double> list(const std::string& key) const { return parse_list(text(key), path(key)); }
    Eigen::MatrixXd matrix(const std::string& key) const { return parse_matrix(text(key), path(key)); }

    Eigen::MatrixXd matrix(const std::string& key, Eigen::Index rows, Eigen::Index cols) const {
        auto a = matrix(key);
        if (a.rows() != rows || a.cols() != cols)
            throw ConfigError(path(key) + ": expected a " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " matrix, got " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
        return a;
    }
    Eigen::MatrixXd matrix_or_zero(const std::string& key, Eigen::Index rows, Eigen::Index cols) const {
        return has(key) ? matrix(key, rows, cols) : Eigen::MatrixXd::Zero(rows, cols);
    }
    Eigen::VectorXd vector_or_zero(const std::string& key, Eigen::Index size) const {
        if (!has(key)) return Eigen::VectorXd::Zero(size);
        const auto v = list(key);
        if (static_cast<Eigen::Index>(v.size()) != size)
            throw ConfigError(path(key) + ": expected " + std::to_string(size) + " values, got " +
                              std::to_string(v.size()));
        return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
    }

private:
    const ptree& tree_;
    std::string name_;
};

inline GridConfig read_grid(const ptree& t) {
    Section s(t, "grid", {"dt", "steps", "K", "N", "seed"});
    GridConfig g;
    g.grid.dt = s.real("dt");
    g.grid.steps = s.count("steps");
    g.grid.history_steps = s.count("K");
    g.particles = s.count("N");
    g.seed = s.count("seed");
    if (!(g.grid.dt > 0.0)) throw ConfigError("grid.dt: must be positive");
    if (g.grid.steps < 1) throw ConfigError("grid.steps: must be >= 1");
    if (g.grid.history_steps < 1) throw ConfigError("grid.K: must be >= 1");
    if (g.particles < 1) throw ConfigError("grid.N: must be >= 1");
    return g;
}

inline SystemConfig read_system(const ptree& t, const std::string& name) {
    Section s(t, name, {"n", "m", "neutral", "A", "kappa", "drift", "B", "C", "g0", "g1", "omega", "eps",
                        "diffusion", "s", "c"});
    SystemConfig c;
    c.n = s.count("n");
    c.m = s.count("m");
    if (c.n < 1) throw ConfigError(s.path("n") + ": must be >= 1");
    if (c.m < 1) throw ConfigError(s.path("m") + ": must be >= 1");
    const auto n = static_cast<Eigen::Index>(c.n);
    const auto m = static_cast<Eigen::Index>(c.m);

    c.neutral = s.text("neutral");
    if (s.has("kappa")) c.kappa = s.real("kappa");
    if (c.neutral == "lagged_linear" || c.neutral == "averaged_linear") {
        c.a = s.matrix("A", n, n);
    } else if (c.neutral == "tanh_lagged") {
        if (!c.kappa) throw ConfigError(s.path("kappa") + ": required for tanh_lagged");
        if (s.has("A")) throw ConfigError(s.path("A") + ": not used by tanh_lagged");
    } else if (c.neutral == "zero") {
        if (s.has("A")) throw ConfigError(s.path("A") + ": not used by zero");
    } else {
        throw ConfigError(s.path("neutral") + ": unknown family '" + c.neutral +
                          "' (zero, lagged_linear, averaged_linear, tanh_lagged)");
    }

    c.drift = s.text("drift");
    if (c.drift != "mean_field_linear")
        throw ConfigError(s.path("drift") + ": unknown family '" + c.drift + "' (mean_field_linear)");
    c.b = s.matrix("B", n, n);
    c.c = s.matrix_or_zero("C", n, n);
    c.g0 = s.vector_or_zero("g0", n);
    c.g1 = s.vector_or_zero("g1", n);
    c.omega = s.real_or("omega", 0.0);
    c.eps = s.real_or("eps", 0.0);

    c.diffusion = s.text("diffusion");
    if (c.diffusion != "neutral_affine" && c.diffusion != "lagged_state")
        throw ConfigError(s.path("diffusion") + ": unknown family '" + c.diffusion +
                          "' (neutral_affine, lagged_state)");
    c.s = s.matrix("s", n, m);
    c.sc = s.matrix_or_zero("c", n, m);
    return c;
}

inline InitialConfig read_initial(const ptree& t, const std::string& name, bool allow_shift) {
    Section s(t, name, {"kind", "value", "amplitude", "shift"});
    InitialConfig c;
    c.kind = s.text("kind");
    if (c.kind == "constant") {
        c.value = s.list("value");
    } else if (c.kind == "sampled") {
        c.amplitude = s.real_or("amplitude", 1.0);
        if (!(c.amplitude > 0.0)) throw ConfigError(s.path("amplitude") + ": must be positive");
    } else if (c.kind == "shift" && allow_shift) {
        c.shift = s.real("shift");
    } else {
        throw ConfigError(s.path("kind") + ": unknown kind '" + c.kind + "'" +
                          (allow_shift ? " (constant, sampled, shift)" : " (constant, sampled)"));
    }
    const std::map<std::string, std::string> used{{"constant", "value"}, {"sampled", "amplitude"}, {"shift", "shift"}};
    for (const char* k : {"value", "amplitude", "shift"})
        if (s.has(k) && used.at(c.kind) != k) throw ConfigError(s.path(k) + ": not used by kind '" + c.kind + "'");
    return c;
}

inline RunConfig read_run(const ptree& t) {
    Section s(t, "run", {"tol", "max_iter", "slack", "localize_tol", "eps", "trials", "bins", "t0",
                         "left_ensemble", "right_ensemble"});
    RunConfig r;
    r.tol = s.real_or("tol", r.tol);
    r.max_iter = s.count_or("max_iter", r.max_iter);
    r.slack = s.real_or("slack", r.slack);
    r.localize_tol = s.real_or("localize_tol", r.localize_tol);
    if (s.has("eps")) r.eps = s.list("eps");
    r.trials = s.count_or("trials", r.trials);
    r.bins = s.count_or("bins", r.bins);
    r.t0 = s.real_or("t0", 0.0);
    r.left_ensemble = s.text_or("left_ensemble", "");
    r.right_ensemble = s.text_or("right_ensemble", "");
    if (!(r.tol > 0.0)) throw ConfigError("run.tol: must be positive");
    if (r.max_iter < 1) throw ConfigError("run.max_iter: must be >= 1");
    if (!(r.slack >= 0.0)) throw ConfigError("run.slack: must be nonnegative");
    if (r.bins < 1) throw ConfigError("run.bins: must be >= 1");
    if (!(r.t0 >= 0.0)) throw ConfigError("run.t0: must be nonnegative");
    return r;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config syntax: " + e.message() + " at line " + std::to_string(e.line()));
    }
    ExperimentConfig cfg;
    cfg.source = text;
    for (const auto& [name, sec] : tree) {
        if (sec.empty() && !sec.data().empty()) throw ConfigError(name + ": keys must live inside a section");
        if (name == "grid") cfg.grid = config_detail::read_grid(sec);
        else if (name == "system") cfg.system = config_detail::read_system(sec, name);
        else if (name == "system_bar") cfg.system_bar = config_detail::read_system(sec, name);
        else if (name == "initial") cfg.initial = config_detail::read_initial(sec, name, false);
        else if (name == "initial_bar") cfg.initial_bar = config_detail::read_initial(sec, name, true);
        else if (name == "run") cfg.run = config_detail::read_run(sec);
        else if (name == "output") {
            config_detail::Section s(sec, "output", {"directory", "precision"});
            cfg.output_directory = s.text_or("directory", cfg.output_directory);
            const auto p = s.count_or("precision", 17);
            if (p < 1 || p > 17) throw ConfigError("output.precision: must lie in [1, 17]");
            cfg.precision = static_cast<int>(p);
        } else {
            throw ConfigError(name + ": unknown section");
        }
    }
    if (cfg.system && cfg.system_bar && (cfg.system->n != cfg.system_bar->n || cfg.system->m != cfg.system_bar->m))
        throw ConfigError("system_bar.n: dimensions must match [system]");
    if (cfg.grid) cfg.grid->grid.t0_window = cfg.run.t0;
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Builds (D, b, σ) from a system block; constructor errors are reported
/// against the block name.
inline CoefficientSet build_coefficients(const SystemConfig& c, const std::string& name) {
    try {
        NeutralTermPtr d;
        if (c.neutral == "zero") d = std::make_shared<ZeroNeutral>(c.n, c.kappa.value_or(0.5));
        else if (c.neutral == "lagged_linear")
            d = c.kappa ? std::make_shared<LaggedLinearNeutral>(c.a, *c.kappa) : std::make_shared<LaggedLinearNeutral>(c.a);
        else if (c.neutral == "averaged_linear")
            d = c.kappa ? std::make_shared<AveragedLinearNeutral>(c.a, *c.kappa)
                        : std::make_shared<AveragedLinearNeutral>(c.a);
        else d = std::make_shared<TanhLaggedNeutral>(c.n, *c.kappa);

        DriftPtr b = std::make_shared<MeanFieldLinearDrift>(c.b, c.c, c.g0, c.g1, c.omega);
        if (c.eps != 0.0) b = std::make_shared<ShiftedDrift>(b, c.eps);

        DiffusionPtr s;
        if (c.diffusion == "neutral_affine") s = std::make_shared<NeutralAffineDiffusion>(c.s, c.sc, d);
        else s = std::make_shared<LaggedStateDiffusion>(c.s, c.sc);
        return CoefficientSet::assemble(d, b, s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(name + ": " + e.what());
    }
}

inline Ensemble build_initial(const InitialConfig& c, const std::string& name, const GridConfig& g, std::size_t n,
                              std::uint64_t stream, const Ensemble* base = nullptr) {
    if (c.kind == "constant") {
        if (c.value.size() != n)
            throw ConfigError(name + ".value: expected " + std::to_string(n) + " values, got " +
                              std::to_string(c.value.size()));
        return Ensemble::replicate(Segment::constant(g.grid.history_steps, g.grid.r0(), c.value), g.particles);
    }
    if (c.kind == "sampled") {
        const auto seed = NoisePlan(g.seed).derived(stream).seed();
        return sampled_ensemble(seed, g.particles, g.grid, n, c.amplitude);
    }
    if (!base) throw ConfigError(name + ".kind: shift needs an [initial] block");
    return shifted_ensemble(*base, c.shift);
}

}  // namespace nsfde
