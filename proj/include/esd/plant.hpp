#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "esd/rng.hpp"

namespace esd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Static quadratic map Q(θ) = Q* + ½ (θ−θ*)ᵀ H (θ−θ*) with H symmetric positive definite.
///
/// Construction validates symmetry (1e-12 relative) and positive definiteness
/// (Cholesky); the object is immutable afterwards.
class QuadraticMap {
public:
    QuadraticMap(Vec theta_star, double q_star, Mat hessian);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(theta_star_.size()); }
    const Vec& theta_star() const noexcept { return theta_star_; }
    double q_star() const noexcept { return q_star_; }
    const Mat& hessian() const noexcept { return hessian_; }

    /// Ascending eigenvalues of the Hessian.
    Vec eigenvalues() const;

    double operator()(const Vec& theta) const;

    /// ½ eᵀ H e for an offset e = θ − θ*, without dimension checks. Accepts Eigen
    /// expressions and does not allocate.
    template <class Derived>
    double half_quadratic(const Eigen::MatrixBase<Derived>& offset) const noexcept {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < hessian_.cols(); ++c) {
            double hc = 0.0;
            for (Eigen::Index r = 0; r < hessian_.rows(); ++r) hc += hessian_(r, c) * offset(r);
            sum += offset(c) * hc;
        }
        return 0.5 * sum;
    }

    /// Q(θ) − Q* for θ stored contiguously; same arithmetic as half_quadratic(θ − θ*).
    double excess(const double* theta) const noexcept {
        const Eigen::Index n = hessian_.rows();
        const double* h = hessian_.data();
        const double* ts = theta_star_.data();
        double sum = 0.0;
        for (Eigen::Index c = 0; c < n; ++c) {
            double hc = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) hc += h[c * n + r] * (theta[r] - ts[r]);
            sum += (theta[c] - ts[c]) * hc;
        }
        return 0.5 * sum;
    }

private:
    Vec theta_star_;
    double q_star_;
    Mat hessian_;
};

/// Q* + ½ |θ−θ*|²_H. Throws std::invalid_argument on dimension mismatch.
double eval_map(const QuadraticMap& map, const Vec& theta);

/// Known uncertainty ranges: H_m I ≤ H ≤ H_M I, |θ(0) − θ*| ≤ σ₀, |Q* − Q₀| ≤ ΔQ.
struct UncertaintyBounds {
    double h_min = 0.0;
    double h_max = 0.0;
    double sigma0 = 0.0;
    double q0 = 0.0;
    double delta_q = 0.0;

    void validate() const;
};

/// Generator of the unknown measurement delay D(j) ∈ {0, …, D_M}.
class DelayModel {
public:
    struct Zero {};
    struct Constant {
        int d = 0;
    };
    struct UniformRandom {
        std::uint64_t seed = 0;
    };
    struct Sequence {
        std::vector<int> values;
    };
    using Variant = std::variant<Zero, Constant, UniformRandom, Sequence>;

    static DelayModel zero();
    /// Constant delay d; the bound D_M defaults to d.
    static DelayModel constant(int d, int d_max = -1);
    static DelayModel uniform(int d_max, std::uint64_t seed);
    /// Explicit D(j) = values[j]; every value must lie in [0, D_M].
    static DelayModel sequence(std::vector<int> values, int d_max);

    int d_max() const noexcept { return d_max_; }
    const Variant& variant() const noexcept { return variant_; }
    bool is_stochastic() const noexcept { return std::holds_alternative<UniformRandom>(variant_); }
    std::uint64_t seed() const noexcept;
    const char* name() const noexcept;

private:
    DelayModel(Variant v, int d_max) : variant_(std::move(v)), d_max_(d_max) {}

    Variant variant_;
    int d_max_ = 0;
};

/// D(j) for step j. UniformRandom consumes one draw from `rng`; other variants do not
/// touch it. Throws ConfigError when a Sequence is exhausted.
int sample_delay(const DelayModel& model, std::int64_t j, Xoshiro256& rng);

/// Ring buffer of the last D_M+1 applied inputs θ(j−D_M), …, θ(j).
class InputHistory {
public:
    InputHistory(std::size_t n, int d_max);

    void push(std::int64_t j, const Vec& theta);
    /// θ(i) for j_last − D_M ≤ i ≤ j_last.
    auto at(std::int64_t i) const { return buffer_.col(slot(i)); }
    const double* data(std::int64_t i) const noexcept { return buffer_.col(slot(i)).data(); }
    std::int64_t last_index() const noexcept { return last_; }
    int d_max() const noexcept { return d_max_; }
    bool holds(std::int64_t i) const noexcept { return i <= last_ && i >= last_ - d_max_ && i >= 0; }

private:
    Eigen::Index slot(std::int64_t i) const noexcept {
        Eigen::Index s = head_ - static_cast<Eigen::Index>(last_ - i);
        return s < 0 ? s + d_max_ + 1 : s;
    }

    Mat buffer_;
    int d_max_;
    std::int64_t last_ = -1;
    Eigen::Index head_ = -1;
};

/// Delayed measurement: 0 for j < D_M, Q(θ(j − D(j))) otherwise.
/// Aborts via std::logic_error if j − D(j) falls outside the recorded window.
double measure(const QuadraticMap& map, const InputHistory& history, std::int64_t j, int delay, int d_max);

}  // namespace esd
