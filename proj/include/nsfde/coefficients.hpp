#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsfde/ensemble.hpp"
#include "nsfde/neutral_term.hpp"

namespace nsfde {

/// b : [0,∞) × C × P(C) → R^n
class Drift {
public:
    virtual ~Drift() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
    virtual void evaluate(double t, SegmentView xi, const Ensemble& mu, std::span<double> out) const = 0;
    virtual bool measure_dependent() const { return true; }
    /// Constant L with |b(t,ξ,μ)-b(t,η,ν)|² ≤ L(‖ξ-η‖∞² + W2(μ,ν)²), when known.
    virtual std::optional<double> lipschitz() const { return std::nullopt; }
    /// Bound on |b(t,0,δ0)|², when known.
    virtual std::optional<double> growth_at_zero() const { return std::nullopt; }

    std::vector<double> operator()(double t, SegmentView xi, const Ensemble& mu) const {
        std::vector<double> out(dim());
        evaluate(t, xi, mu, out);
        return out;
    }
};

/// σ : [0,∞) × C × P(C) → R^{n×m}, written row-major (out[i*m + j] = σ_ij).
class Diffusion {
public:
    virtual ~Diffusion() = default;
    virtual std::size_t dim() const = 0;
    virtual std::size_t noise_dim() const = 0;
    virtual std::string name() const = 0;
    virtual void evaluate(double t, SegmentView xi, const Ensemble& mu, std::span<double> out) const = 0;
    virtual bool measure_dependent() const { return true; }
    /// Constant L with Σ_j |σ_ij(ξ)-σ_ij(η)|² ≤ L |ξ^i(0)-D^i(ξ)-η^i(0)+D^i(η)|², when it holds.
    virtual std::optional<double> d_coordinate_lipschitz() const { return std::nullopt; }
    virtual std::optional<double> growth_at_zero() const { return std::nullopt; }

    std::vector<double> operator()(double t, SegmentView xi, const Ensemble& mu) const {
        std::vector<double> out(dim() * noise_dim());
        evaluate(t, xi, mu, out);
        return out;
    }
};

using DriftPtr = std::shared_ptr<const Drift>;
using DiffusionPtr = std::shared_ptr<const Diffusion>;

namespace detail {

inline double spectral_norm(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

inline void require_shape(const Eigen::MatrixXd& a, Eigen::Index rows, Eigen::Index cols,
                          const std::string& what) {
    if (a.rows() != rows || a.cols() != cols)
        throw std::invalid_argument(what + " must be " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    if (!a.allFinite()) throw std::invalid_argument(what + " must be finite");
}

}  // namespace detail

/// b(t,ξ,μ) = B·ξ(0) + C·mean_μ[ζ(0)] + g0 + g1·sin(ω t)
class MeanFieldLinearDrift final : public Drift {
public:
    MeanFieldLinearDrift(Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::VectorXd g0,
                         Eigen::VectorXd g1 = {}, double omega = 0.0)
        : b_(std::move(b)), c_(std::move(c)), g0_(std::move(g0)), g1_(std::move(g1)), omega_(omega) {
        const auto n = b_.rows();
        detail::require_shape(b_, n, n, "drift matrix B");
        detail::require_shape(c_, n, n, "drift matrix C");
        if (g0_.size() == 0) g0_ = Eigen::VectorXd::Zero(n);
        if (g1_.size() == 0) g1_ = Eigen::VectorXd::Zero(n);
        if (g0_.size() != n || g1_.size() != n) throw std::invalid_argument("drift offsets must have length n");
        measure_dependent_ = c_.cwiseAbs().maxCoeff() > 0.0;
    }

    std::size_t dim() const override { return static_cast<std::size_t>(b_.rows()); }
    std::string name() const override { return "mean_field_linear"; }
    bool measure_dependent() const override { return measure_dependent_; }
    const Eigen::MatrixXd& b_matrix() const { return b_; }
    const Eigen::MatrixXd& c_matrix() const { return c_; }

    std::optional<double> lipschitz() const override {
        const double nb = detail::spectral_norm(b_);
        const double nc = detail::spectral_norm(c_);
        return 2.0 * std::max(nb * nb, nc * nc);
    }

    std::optional<double> growth_at_zero() const override {
        const double g = g0_.norm() + g1_.norm();
        return g * g;
    }

    void evaluate(double t, SegmentView xi, const Ensemble& mu, std::span<double> out) const override {
        const auto x0 = xi.terminal();
        const auto& mean = mu.terminal_mean();
        const double wave = omega_ == 0.0 ? 0.0 : std::sin(omega_ * t);
        const auto n = b_.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = g0_(i) + g1_(i) * wave;
            for (Eigen::Index j = 0; j < n; ++j) acc += b_(i, j) * x0[j] + c_(i, j) * mean[j];
            out[i] = acc;
        }
    }

private:
    Eigen::MatrixXd b_, c_;
    Eigen::VectorXd g0_, g1_;
    double omega_;
    bool measure_dependent_ = true;
};

/// b + ε·(1,…,1)
class ShiftedDrift final : public Drift {
public:
    ShiftedDrift(DriftPtr base, double eps) : base_(std::move(base)), eps_(eps) {}
    std::size_t dim() const override { return base_->dim(); }
    std::string name() const override { return base_->name() + "+eps"; }
    bool measure_dependent() const override { return base_->measure_dependent(); }
    std::optional<double> lipschitz() const override { return base_->lipschitz(); }
    std::optional<double> growth_at_zero() const override {
        auto g = base_->growth_at_zero();
        if (!g) return g;
        const double r = std::sqrt(*g) + std::abs(eps_) * std::sqrt(static_cast<double>(dim()));
        return r * r;
    }
    void evaluate(double t, SegmentView xi, const Ensemble& mu, std::span<double> out) const override {
        base_->evaluate(t, xi, mu, out);
        for (double& v : out) v += eps_;
    }

private:
    DriftPtr base_;
    double eps_;
};

class FunctionDrift final : public Drift {
public:
    using Fn = std::function<void(double, SegmentView, const Ensemble&, std::span<double>)>;
    FunctionDrift(std::size_t dim, Fn fn, std::optional<double> lipschitz = std::nullopt,
                  bool measure_dependent = true, std::string name = "function")
        : dim_(dim), fn_(std::move(fn)), lipschitz_(lipschitz), measure_dependent_(measure_dependent),
          name_(std::move(name)) {}
    std::size_t dim() const override { return dim_; }
    std::string name() const override { return name_; }
    bool measure_dependent() const override { return measure_dependent_; }
    std::optional<double> lipschitz() const override { return lipschitz_; }
    void evaluate(double t, SegmentView xi, const Ensemble& mu, std::span<double> out) const override {
        fn_(t, xi, mu, out);
    }

private:
    std::size_t dim_;
    Fn fn_;
    std::optional<double> lipschitz_;
    bool measure_dependent_;
    std::string name_;
};

/// σ_ij(t,ξ,μ) = S_ij·(ξ^i(0) - D^i(ξ)) + c_ij. Depends on ξ only through the
/// i-th D-coordinate; S = 0 gives additive noise.
class NeutralAffineDiffusion final : public Diffusion {
public:
    NeutralAffineDiffusion(Eigen::MatrixXd s, Eigen::MatrixXd c, NeutralTermPtr d)
        : s_(std::move(s)), c_(std::move(c)), d_(std::move(d)) {
        if (!d_) throw std::invalid_argument("diffusion needs a neutral term");
        detail::require_shape(s_, static_cast<Eigen::Index>(d_->dim()), s_.cols(), "diffusion matrix s");
        detail::require_shape(c_, s_.rows(), s_.cols(), "diffusion matrix c");
        if (s_.cols() == 0) throw std::invalid_argument("noise dimension m must be positive");
    }

    std::size_t dim() const override { return static_cast<std::size_t>(s_.rows()); }
    std::size_t noise_dim() const override { return static_cast<std::size_t>(s_.cols()); }
    std::string name() const override { return "neutral_affine"; }
    bool measure_dependent() const override { return false; }
    std::optional<double> d_coordinate_lipschitz() const override {
        return s_.array().square().rowwise().sum().maxCoeff();
    }
    std::optional<double> growth_at_zero() const override { return c_.squaredNorm(); }

    void evaluate(double, SegmentView xi, const Ensemble&, std::span<double> out) const override {
        const auto dc = d_->d_coordinates(xi);
        const auto m = s_.cols();
        for (Eigen::Index i = 0; i < s_.rows(); ++i)
            for (Eigen::Index j = 0; j < m; ++j) out[i * m + j] = s_(i, j) * dc[i] + c_(i, j);
    }

private:
    Eigen::MatrixXd s_, c_;
    NeutralTermPtr d_;
};

/// σ_ij(t,ξ,μ) = S_ij·ξ^i(-r0) + c_ij. Reads the oldest history value, so
/// it is not a function of the D-coordinate alone.
class LaggedStateDiffusion final : public Diffusion {
public:
    LaggedStateDiffusion(Eigen::MatrixXd s, Eigen::MatrixXd c) : s_(std::move(s)), c_(std::move(c)) {
        detail::require_shape(c_, s_.rows(), s_.cols(), "diffusion matrix c");
        if (s_.rows() == 0 || s_.cols() == 0) throw std::invalid_argument("diffusion matrix s is empty");
    }

    std::size_t dim() const override { return static_cast<std::size_t>(s_.rows()); }
    std::size_t noise_dim() const override { return static_cast<std::size_t>(s_.cols()); }
    std::string name() const override { return "lagged_state"; }
    bool measure_dependent() const override { return false; }
    std::optional<double> growth_at_zero() const override { return c_.squaredNorm(); }

    void evaluate(double, SegmentView xi, const Ensemble&, std::span<double> out) const override {
        const auto lag = xi.oldest();
        const auto m = s_.cols();
        for (Eigen::Index i = 0; i < s_.rows(); ++i)
            for (Eigen::Index j = 0; j < m; ++j) out[i * m + j] = s_(i, j) * lag[i] + c_(i, j);
    }

private:
    Eigen::MatrixXd s_, c_;
};

class FunctionDiffusion final : public Diffusion {
public:
    using Fn = std::function<void(double, SegmentView, const Ensemble&, std::span<double>)>;
    FunctionDiffusion(std::size_t dim, std::size_t noise_dim, Fn fn,
                      std::optional<double> d_coordinate_lipschitz = std::nullopt,
                      std::string name = "function")
        : dim_(dim), noise_dim_(noise_dim), fn_(std::move(fn)), lip_(d_coordinate_lipschitz),
          name_(std::move(name)) {}
    std::size_t dim() const override { return dim_; }
    std::size_t noise_dim() const override { return noise_dim_; }
    std::string name() const override { return name_; }
    std::optional<double> d_coordinate_lipschitz() const override { return lip_; }
    void evaluate(double t, SegmentView xi, const Ensemble& mu, std::span<double> out) const override {
        fn_(t, xi, mu, out);
    }

private:
    std::size_t dim_, noise_dim_;
    Fn fn_;
    std::optional<double> lip_;
    std::string name_;
};

/// κ of the neutral term, the shared Lipschitz constant L of the drift/diffusion
/// assumptions, and β bounding the coefficients at (t, 0, δ0).
struct DeclaredConstants {
    double kappa = 0.5;
    double lipschitz = 1.0;
    double beta = 0.0;
};

/// The triple (D, b, σ) of one neutral McKean–Vlasov equation.
struct CoefficientSet {
    NeutralTermPtr neutral;
    DriftPtr drift;
    DiffusionPtr diffusion;
    DeclaredConstants declared;

    std::size_t dim() const { return neutral->dim(); }
    std::size_t noise_dim() const { return diffusion->noise_dim(); }
    bool measure_dependent() const { return drift->measure_dependent() || diffusion->measure_dependent(); }

    void validate() const {
        if (!neutral || !drift || !diffusion) throw std::invalid_argument("coefficient set is incomplete");
        if (drift->dim() != neutral->dim() || diffusion->dim() != neutral->dim())
            throw std::invalid_argument("coefficient dimensions disagree: D has n=" +
                                        std::to_string(neutral->dim()) + ", b has n=" +
                                        std::to_string(drift->dim()) + ", sigma has n=" +
                                        std::to_string(diffusion->dim()));
    }

    /// Declared constants taken from the components where they are known.
    static CoefficientSet assemble(NeutralTermPtr d, DriftPtr b, DiffusionPtr s) {
        CoefficientSet cs{std::move(d), std::move(b), std::move(s), {}};
        cs.validate();
        cs.declared.kappa = cs.neutral->kappa();
        cs.declared.lipschitz = std::max(cs.drift->lipschitz().value_or(0.0),
                                         cs.diffusion->d_coordinate_lipschitz().value_or(0.0));
        cs.declared.beta = cs.drift->growth_at_zero().value_or(0.0) +
                           cs.diffusion->growth_at_zero().value_or(0.0);
        return cs;
    }

    CoefficientSet with_drift(DriftPtr b) const {
        CoefficientSet out = *this;
        out.drift = std::move(b);
        out.validate();
        return out;
    }
};

}  // namespace nsfde
