#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "esd/bounds.hpp"
#include "esd/estimator.hpp"
#include "esd/plant.hpp"

namespace esd {

enum class SearchMethod { Theorem, Simulation };

const char* to_string(SearchMethod m) noexcept;
SearchMethod parse_method(const std::string& s);

/// σ values min + (max − min)·i/steps for i = 1..steps, so min itself is excluded.
struct SigmaGrid {
    double min = 1.0;
    double max = 2.0;
    int steps = 30;

    std::vector<double> values() const;
    /// (σ₀, 2σ₀] in 30 steps.
    static SigmaGrid around(double sigma0);
};

struct EpsilonBracket {
    double lo = 1e-16;
    double hi = 1e-1;
};

enum class CriterionMode { UnbiasedExponential, ClassicalPractical };

/// What a simulated run must show to count as stable.
///
/// Unbiased: the largest error over the last tail_fraction of the run is below
/// fail_ratio·err(D_M), and the maxima over `windows` equal windows after D_M never
/// increase. Classical: the error stays below σ for j ≥ D_M and the tail maximum lies
/// within radius_slack times the residual-set radius at (ε, σ).
struct ConvergenceCriterion {
    CriterionMode mode = CriterionMode::UnbiasedExponential;
    double tail_fraction = 0.1;
    double fail_ratio = 1e-2;
    int windows = 20;
    double radius_slack = 2.0;
    /// σ for the classical bound and radius; unset means the theorem-tuned σ.
    std::optional<double> sigma;

    static ConvergenceCriterion for_variant(Variant v);
    void validate() const;
};

struct SearchConfig {
    /// Unset means SigmaGrid::around(σ₀).
    std::optional<SigmaGrid> sigma_grid;
    EpsilonBracket epsilon_bracket{1e-16, 1e-1};
    EpsilonBracket sim_bracket{1e-7, 1e-1};
    /// Relative width at which bisection stops.
    double tol = 0.05;
    int max_bisections = 40;
    /// Points probed above the maximum, at ε*(1 + i·tol), to check monotonicity.
    int probe_points = 3;
    int fallback_points = 200;
    /// Required slack δ in the strict inequalities.
    double strict = 0.0;

    /// Minimum simulation horizon.
    std::int64_t sim_horizon = 2000000;
    /// Horizon is stretched to horizon_decays/(ε·rate) when that is longer, rate being
    /// λ (unbiased) or k·H_m (classical); 0 keeps sim_horizon fixed. The default 5 lets
    /// the gain fall by e⁻⁵, below the 1e-2 tail ratio.
    double horizon_decays = 5.0;
    std::int64_t sim_horizon_max = 4000000000;
    std::vector<std::uint64_t> sim_seeds{1, 2, 3};
    std::optional<ConvergenceCriterion> criterion;
    /// Worker threads for seeds; 0 picks the hardware concurrency.
    unsigned threads = 0;

    void validate() const;
};

/// Everything of a run except ε, plus the bounds the certificate is stated against.
struct SimTemplate {
    QuadraticMap map;
    DelayModel delay;
    Vec amplitudes;
    EsParams params;
    Vec theta0;
    double q0 = 0.0;
    UncertaintyBounds uncertainty;

    EsRunConfig make(double epsilon, std::int64_t horizon, std::uint64_t seed) const;
    /// Bound inputs with the same gains, regime chosen from D_M.
    BoundInputs bound_inputs(double epsilon, double sigma) const;
};

struct SeedVerdict {
    std::uint64_t seed = 0;
    bool pass = false;
    std::string reason;
    RunStatus status = RunStatus::Completed;
    std::int64_t steps = 0;
    double reference_err = 0.0;
    double max_err = 0.0;
    double tail_max = 0.0;
    double threshold = 0.0;
};

struct SimVerdict {
    double epsilon = 0.0;
    std::int64_t horizon = 0;
    bool pass = false;
    std::vector<SeedVerdict> seeds;

    /// Reason of the first failing seed, empty on pass.
    std::string reason() const;
};

struct FeasibilityReport {
    Variant variant = Variant::Unbiased;
    SearchMethod method = SearchMethod::Theorem;
    int d_max = 0;
    bool found = false;
    double sigma = 0.0;
    double epsilon_star = 0.0;
    /// 1 − ε*λ (unbiased) or 1 − ε*kH_m (classical).
    double decay_rate = 1.0;
    /// 1 − decay_rate, kept separately because it underflows the subtraction.
    double decay_gap = 0.0;
    std::vector<Margin> margins;
    std::optional<BoundChain> chain;
    bool monotone_verified = false;
    bool used_fallback = false;
    /// Best ε* per σ on the grid (theorem method); 0 where nothing was feasible.
    std::vector<std::pair<double, double>> sigma_curve;
    /// Every simulation verdict evaluated, in evaluation order.
    std::vector<SimVerdict> evaluations;
    std::string note;
    double seconds = 0.0;
};

/// Grid over σ, log-space bisection on ε* per σ, 3-point probe above the maximum and a
/// log-grid scan if the probe finds a feasible point.
FeasibilityReport max_epsilon_theorem(const BoundInputs& base, const SearchConfig& search);

/// Horizon used by the simulation search at ε.
std::int64_t simulation_horizon(const SimTemplate& tpl, double epsilon, const SearchConfig& search);

/// Runs all seeds at ε and applies the criterion. `sigma` feeds the classical bound.
SimVerdict evaluate_simulation(const SimTemplate& tpl, double epsilon, const SearchConfig& search,
                               const ConvergenceCriterion& criterion, double sigma,
                               std::optional<std::int64_t> horizon = std::nullopt);

/// Largest ε in the bracket at which the criterion holds for all seeds. Steps down from
/// the top of the bracket by half decades to the first pass, then bisects in log space
/// against the failure above it.
FeasibilityReport max_epsilon_simulation(const SimTemplate& tpl, const SearchConfig& search);

/// The worked 3-D example: map, uncertainty ranges, gains and initial condition.
struct ExampleSetup {
    QuadraticMap map;
    UncertaintyBounds uncertainty;
    Vec amplitudes;
    EsParams params;
    Vec theta0;

    static ExampleSetup standard();
    SimTemplate sim_template(Variant variant, int d_max, std::uint64_t seed = 1) const;
    BoundInputs bound_inputs(Variant variant, int d_max) const;
};

struct TableRow {
    FeasibilityReport report;
    bool skipped = false;
};

struct TableResult {
    Variant variant = Variant::Unbiased;
    std::vector<TableRow> theorem_rows;
    std::vector<TableRow> simulation_rows;
};

struct TableOptions {
    std::vector<int> delays{0, 5, 50};
    bool run_simulation = true;
    /// Skip the simulation rows with D_M at or above this (0 keeps all).
    int skip_simulation_from = 0;
    SearchConfig search;
};

TableResult table_reproduce(Variant variant, const TableOptions& options);

/// Aligned text table with the method, D_M, σ, ε* and decay-rate columns.
void render_table(std::ostream& os, const TableResult& table);
/// Columns variant, D_M, sigma, epsilon_star, decay_rate, method.
void write_table_csv(std::ostream& os, const TableResult& table);
void write_report_csv_header(std::ostream& os);
void write_report_csv_row(std::ostream& os, const FeasibilityReport& r);

}  // namespace esd
