#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "esd/estimator.hpp"
#include "esd/plant.hpp"

namespace esd {

enum class DelayRegime { Delayed, DelayFree };

const char* to_string(DelayRegime r) noexcept;
/// D_M = 0 goes through the delay-free bounds; the delayed Δ̄_out divides by D_M.
inline DelayRegime regime_for(int d_max) noexcept { return d_max == 0 ? DelayRegime::DelayFree : DelayRegime::Delayed; }

struct BoundInputs {
    int n = 0;
    int d_max = 0;
    Vec amplitudes;
    double k = 0.0;
    double lambda = 0.0;
    double omega_h = 0.0;
    double alpha0 = 1.0;
    double epsilon = 0.0;
    double sigma = 0.0;
    UncertaintyBounds uncertainty;
    Variant variant = Variant::Unbiased;
    DelayRegime regime = DelayRegime::Delayed;

    /// Copy with a different ε* and σ.
    BoundInputs at(double epsilon_star, double sigma_value) const;
};

using RhoBars = std::array<double, 4>;

struct BoundChain {
    RhoBars rho_bar{};
    double sigma_y = 0.0;
    double sigma_eta = 0.0;
    double delta = 0.0;
    double delta_out = 0.0;
    double delta_g = 0.0;
    double delta_y = 0.0;
};

/// Window-sum bounds ‖ρ_l(j)‖ ≤ ρ̄_l √ε for D_M ≥ 1. Throws RegimeError for D_M = 0.
RhoBars rho_bars_delayed(const BoundInputs& in);
/// ‖ρ_l(j)‖ ≤ ρ̄_l ε for D_M = 0, T = 2n+1.
RhoBars rho_bars_delay_free(const BoundInputs& in);
RhoBars rho_bars(const BoundInputs& in);

struct FilterBounds {
    double sigma_y = 0.0;
    double sigma_eta = 0.0;
};

/// σ_y and σ_η of the unbiased chain; defined for any α₀ ≥ 0.
FilterBounds filter_bounds_theorem1(const BoundInputs& in);

/// Unbiased chain, evaluated σ_y → σ_η → Δ → Δ̄_out → Δ_G → Δ_Y.
/// Throws ChainUndefined when a denominator is not positive.
BoundChain chain_theorem1(const BoundInputs& in);
/// Classical chain σ_y → Δ → Δ̄_out → Δ_G → Δ_Y (σ_η is reported as 0).
BoundChain chain_theorem2(const BoundInputs& in);
BoundChain chain_for(const BoundInputs& in);

/// Residual of one condition; satisfied when value > 0 (right side minus left side).
struct Margin {
    std::string name;
    double value = 0.0;
};

struct FeasibilityCheck {
    bool feasible = false;
    std::vector<Margin> margins;
    std::string reason;
    std::optional<BoundChain> chain;

    /// The margin with the smallest value, or nullptr when none were evaluated.
    const Margin* tightest() const;
};

/// Conditions for the unbiased loop. Delay-free regime uses the simplified σ condition
/// in place of the period and delayed σ conditions. `strict` is the required slack δ.
FeasibilityCheck feasible_theorem1(const BoundInputs& in, double strict = 0.0);
FeasibilityCheck feasible_theorem2(const BoundInputs& in, double strict = 0.0);
FeasibilityCheck feasible_for(const BoundInputs& in, double strict = 0.0);

/// Radius of the residual set for the classical loop: √ε(Δ_G + εΔ_Y/(1−|1−εkH_m|)),
/// with ε in place of √ε in the delay-free regime.
double ultimate_bound_radius(const BoundInputs& in, const BoundChain& chain);

/// σ = σ₁ − α₀√(Σaᵢ²) for maps that are quadratic only within |θ−θ*| ≤ σ₁.
/// Throws std::domain_error("empty region") when the result is not positive.
double region_for_local_map(double sigma1, double alpha0, const Vec& amplitudes);

namespace stable {
/// |1−x|^p without forming 1−x for small x.
double pow_one_minus(double x, double p);
/// |1−x| − |1−y|
double abs_diff(double x, double y);
/// |1−x|² − |1−y|
double sq_abs_diff(double x, double y);
/// 1 − |1−x|
double one_minus_abs(double x);
}  // namespace stable

}  // namespace esd
