#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsfde/segment.hpp"

namespace nsfde {

/// The neutral term D : C([-r0,0]; R^n) → R^n.
///
/// `kappa()` is the declared contraction constant, i.e. the claim
/// |D^i(ξ) - D^i(η)| ≤ κ max_i ‖ξ^i - η^i‖∞. Checkers in checks.hpp test the claim;
/// nothing here enforces it.
class NeutralTerm {
public:
    virtual ~NeutralTerm() = default;

    virtual std::size_t dim() const = 0;
    virtual double kappa() const = 0;
    virtual std::string name() const = 0;
    virtual void evaluate(SegmentView xi, std::span<double> out) const = 0;

    /// True when D reads only θ < 0, so the terminal value can be recovered explicitly.
    virtual bool strictly_lagged() const { return false; }

    std::vector<double> operator()(SegmentView xi) const {
        std::vector<double> out(dim());
        evaluate(xi, out);
        return out;
    }

    double component(SegmentView xi, std::size_t i) const { return (*this)(xi)[i]; }

    /// ξ^i(0) - D^i(ξ), the i-th D-coordinate.
    double d_coordinate(SegmentView xi, std::size_t i) const {
        return xi.terminal()[i] - component(xi, i);
    }

    /// ξ(0) - D(ξ) for all components.
    std::vector<double> d_coordinates(SegmentView xi) const {
        auto out = (*this)(xi);
        const auto x0 = xi.terminal();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x0[i] - out[i];
        return out;
    }
};

using NeutralTermPtr = std::shared_ptr<const NeutralTerm>;

namespace detail {

inline void require_square(const Eigen::MatrixXd& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw std::invalid_argument(std::string(what) + " must be a non-empty square matrix");
    if (!a.allFinite()) throw std::invalid_argument(std::string(what) + " must be finite");
}

inline double max_abs_row_sum(const Eigen::MatrixXd& a) {
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double spectral_norm_of(const Eigen::MatrixXd& a) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

/// Smallest κ valid for a linear D under both the componentwise and the
/// Euclidean sup norm.
inline double linear_kappa(const Eigen::MatrixXd& a) {
    return std::max(max_abs_row_sum(a), spectral_norm_of(a));
}

/// Default declaration for a linear family; A = 0 contracts with any κ.
inline double default_linear_kappa(const Eigen::MatrixXd& a) {
    const double k = linear_kappa(a);
    return k > 0.0 ? k : 0.5;
}

inline void check_declared_kappa(double declared, double implied) {
    if (!(declared > 0.0 && declared < 1.0))
        throw std::invalid_argument("kappa must lie in (0, 1), got " + std::to_string(declared));
    if (declared + 1e-15 < implied)
        throw std::invalid_argument("declared kappa " + std::to_string(declared) +
                                    " is below the family's contraction constant " +
                                    std::to_string(implied));
}

}  // namespace detail

/// D ≡ 0. Any κ ∈ (0,1) is a valid declaration.
class ZeroNeutral final : public NeutralTerm {
public:
    explicit ZeroNeutral(std::size_t dim, double kappa = 0.5) : dim_(dim), kappa_(kappa) {
        detail::check_declared_kappa(kappa, 0.0);
    }
    std::size_t dim() const override { return dim_; }
    double kappa() const override { return kappa_; }
    std::string name() const override { return "zero"; }
    bool strictly_lagged() const override { return true; }
    void evaluate(SegmentView, std::span<double> out) const override {
        std::fill(out.begin(), out.end(), 0.0);
    }

private:
    std::size_t dim_;
    double kappa_;
};

/// D(ξ) = A·ξ(-r0). With A entrywise nonnegative this is monotone; the
/// contraction constant under the componentwise norm is the max row sum of |A|,
/// under the Euclidean norm the spectral norm. The default κ is the larger.
class LaggedLinearNeutral final : public NeutralTerm {
public:
    explicit LaggedLinearNeutral(Eigen::MatrixXd a)
        : LaggedLinearNeutral(a, detail::default_linear_kappa(a)) {}

    LaggedLinearNeutral(Eigen::MatrixXd a, double kappa) : a_(std::move(a)), kappa_(kappa) {
        detail::require_square(a_, "neutral matrix A");
        detail::check_declared_kappa(kappa_, detail::linear_kappa(a_));
    }

    std::size_t dim() const override { return static_cast<std::size_t>(a_.rows()); }
    double kappa() const override { return kappa_; }
    std::string name() const override { return "lagged_linear"; }
    bool strictly_lagged() const override { return true; }
    const Eigen::MatrixXd& matrix() const { return a_; }

    void evaluate(SegmentView xi, std::span<double> out) const override {
        const auto lag = xi.oldest();
        for (Eigen::Index i = 0; i < a_.rows(); ++i) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < a_.cols(); ++j) acc += a_(i, j) * lag[j];
            out[i] = acc;
        }
    }

private:
    Eigen::MatrixXd a_;
    double kappa_;
};

/// D(ξ) = A · (1/(K+1)) Σ_j ξ(θ_j). Reads θ = 0, so terminal recovery is implicit.
class AveragedLinearNeutral final : public NeutralTerm {
public:
    explicit AveragedLinearNeutral(Eigen::MatrixXd a)
        : AveragedLinearNeutral(a, detail::default_linear_kappa(a)) {}

    AveragedLinearNeutral(Eigen::MatrixXd a, double kappa) : a_(std::move(a)), kappa_(kappa) {
        detail::require_square(a_, "neutral matrix A");
        detail::check_declared_kappa(kappa_, detail::linear_kappa(a_));
    }

    std::size_t dim() const override { return static_cast<std::size_t>(a_.rows()); }
    double kappa() const override { return kappa_; }
    std::string name() const override { return "averaged_linear"; }
    const Eigen::MatrixXd& matrix() const { return a_; }

    void evaluate(SegmentView xi, std::span<double> out) const override {
        const std::size_t n = xi.dim();
        std::vector<double> avg(n, 0.0);
        for (std::size_t j = 0; j < xi.points(); ++j)
            for (std::size_t i = 0; i < n; ++i) avg[i] += xi(j, i);
        for (double& v : avg) v /= static_cast<double>(xi.points());
        for (Eigen::Index i = 0; i < a_.rows(); ++i) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < a_.cols(); ++j) acc += a_(i, j) * avg[j];
            out[i] = acc;
        }
    }

private:
    Eigen::MatrixXd a_;
    double kappa_;
};

/// D^i(ξ) = κ·tanh(ξ^i(-r0)). Nonlinear, monotone, D(0) = 0.
class TanhLaggedNeutral final : public NeutralTerm {
public:
    TanhLaggedNeutral(std::size_t dim, double kappa) : dim_(dim), kappa_(kappa) {
        detail::check_declared_kappa(kappa, 0.0);
    }
    std::size_t dim() const override { return dim_; }
    double kappa() const override { return kappa_; }
    std::string name() const override { return "tanh_lagged"; }
    bool strictly_lagged() const override { return true; }
    void evaluate(SegmentView xi, std::span<double> out) const override {
        const auto lag = xi.oldest();
        for (std::size_t i = 0; i < dim_; ++i) out[i] = kappa_ * std::tanh(lag[i]);
    }

private:
    std::size_t dim_;
    double kappa_;
};

/// Compile-time extension point: wraps any callable. The declared κ is taken
/// on trust (it may be outside (0,1) so that checkers can be exercised on
/// deliberately broken terms).
class FunctionNeutral final : public NeutralTerm {
public:
    using Fn = std::function<void(SegmentView, std::span<double>)>;

    FunctionNeutral(std::size_t dim, double kappa, Fn fn, bool lagged = false,
                    std::string name = "function")
        : dim_(dim), kappa_(kappa), fn_(std::move(fn)), lagged_(lagged), name_(std::move(name)) {}

    std::size_t dim() const override { return dim_; }
    double kappa() const override { return kappa_; }
    std::string name() const override { return name_; }
    bool strictly_lagged() const override { return lagged_; }
    void evaluate(SegmentView xi, std::span<double> out) const override { fn_(xi, out); }

private:
    std::size_t dim_;
    double kappa_;
    Fn fn_;
    bool lagged_;
    std::string name_;
};

}  // namespace nsfde
