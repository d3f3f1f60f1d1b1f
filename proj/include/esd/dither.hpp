#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "esd/plant.hpp"

namespace esd {

/// T = max{ n·D_M·⌊1/√ε⌋, 2n+1 } in exact integer arithmetic.
std::int64_t make_period(int n, int d_max, double epsilon);

/// ⌊1/√ε⌋, corrected so that q²ε ≤ 1 < (q+1)²ε holds in floating point.
std::int64_t floor_inv_sqrt(double epsilon);

/// Sinusoidal perturbation S_i(j) = a_i sin(ω_i j) and demodulation
/// M_i(j) = (2/a_i) sin(ω_i j), with ω_i = 2πi/T.
///
/// Phases are reduced to (i·(j mod T)) mod T before scaling by 2π/T, so the
/// signals are exactly T-periodic regardless of the horizon.
class DitherConfig {
public:
    DitherConfig(Vec amplitudes, double epsilon, int d_max);

    int n() const noexcept { return static_cast<int>(amplitudes_.size()); }
    const Vec& amplitudes() const noexcept { return amplitudes_; }
    double epsilon() const noexcept { return epsilon_; }
    int d_max() const noexcept { return d_max_; }
    std::int64_t period() const noexcept { return period_; }
    /// ω_i = 2πi/T, i = 1..n.
    Vec frequencies() const;

    /// sin(ω_i j) for all i, written into `out` (size n).
    void sines(std::int64_t j, Vec& out) const;
    /// As `sines` with r = j mod T already reduced to [0, T).
    void sines_reduced(std::int64_t r, Vec& out) const;
    double phase(int i, std::int64_t j) const noexcept;

    /// √(Σ a_i²)
    double amplitude_norm() const noexcept { return amplitudes_.norm(); }
    /// √(Σ 1/a_i²)
    double inverse_amplitude_norm() const noexcept { return amplitudes_.cwiseInverse().norm(); }

    /// Periods up to this length get a precomputed table of sin(2πr/T).
    static constexpr std::int64_t kTableMax = std::int64_t{1} << 22;

private:
    Vec amplitudes_;
    double epsilon_;
    int d_max_;
    std::int64_t period_;
    std::shared_ptr<const std::vector<double>> table_;
};

Vec dither_vec(const DitherConfig& cfg, std::int64_t j);
Vec demod_vec(const DitherConfig& cfg, std::int64_t j);

/// α(j) = α₀ λ̄ʲ with λ̄ = 1 − ελ.
struct GainSchedule {
    double alpha0 = 1.0;
    double lambda = 0.0;
    double epsilon = 0.0;

    double lambda_bar() const noexcept { return 1.0 - epsilon * lambda; }
};

/// Below this the gain is treated as exhausted.
inline constexpr double kGainFloor = 1e-280;

struct GainValue {
    double alpha = 0.0;
    bool exhausted = false;
};

/// α₀ exp(j·log1p(−ελ)) when λ̄ > 0, α₀ λ̄ʲ otherwise. Flags values below kGainFloor.
GainValue gain(const GainSchedule& schedule, std::int64_t j);

/// α(j) maintained by one multiply per step, re-anchored to the exp-log form
/// every kRefresh steps to bound drift.
class GainTracker {
public:
    static constexpr std::int64_t kRefresh = 100000;

    explicit GainTracker(const GainSchedule& schedule);

    double value() const noexcept { return alpha_; }
    std::int64_t step() const noexcept { return j_; }
    bool exhausted() const noexcept { return alpha_ < kGainFloor; }
    void advance();

private:
    GainSchedule schedule_;
    double lambda_bar_;
    double alpha_;
    std::int64_t j_ = 0;
    std::int64_t until_refresh_ = kRefresh;
};

/// Window averages over t..t+T−1 of M, M Sᵀ and M·(SᵀHS).
struct AveragingSums {
    Vec mean_demod;
    Mat mean_demod_dither;
    Vec mean_demod_quadratic;
};

AveragingSums averaging_sums(const DitherConfig& cfg, const Mat& hessian, std::int64_t t);

/// The four periodic coefficient terms of the error dynamics at step j:
///   a1 = −k M Sᵀ H + k H,  a2 = k M,  a3 = −½ k M SᵀHS,  a4 = −½ k M.
struct CoefficientTerms {
    Mat a1;
    Vec a2;
    Vec a3;
    Vec a4;
};

CoefficientTerms coefficient_terms(const DitherConfig& cfg, double k, const Mat& hessian, std::int64_t j);

/// ρ_l(j) = −(ε/T) Σ_{i=j}^{j+T−1} (j+T−i) a_l(i), l = 1..4.
struct RhoValues {
    Mat rho1;
    Vec rho2;
    Vec rho3;
    Vec rho4;

    /// Spectral norm for l = 1, Euclidean norm for l = 2..4.
    double norm(int l) const;
};

/// Direct O(T) window summation.
RhoValues rho_exact(const DitherConfig& cfg, double k, const Mat& hessian, std::int64_t j);

/// max over j in one period of ‖ρ_l(j)‖, l = 1..4, walked with a RhoTracker.
std::array<double, 4> rho_period_max(const DitherConfig& cfg, double k, const Mat& hessian);

/// Walks ρ(j) forward with ρ(j+1) = ρ(j) + ε a(j), anchored by one direct sum.
class RhoTracker {
public:
    RhoTracker(const DitherConfig& cfg, double k, const Mat& hessian, std::int64_t j0);

    const RhoValues& value() const noexcept { return rho_; }
    std::int64_t step() const noexcept { return j_; }
    void advance();
    void advance_to(std::int64_t j);

private:
    const DitherConfig* cfg_;
    double k_;
    Mat hessian_;
    RhoValues rho_;
    std::int64_t j_;
};

}  // namespace esd
