#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "esd/dither.hpp"
#include "esd/plant.hpp"
#include "esd/rng.hpp"

namespace esd {

enum class Variant { Unbiased, Classical };

const char* to_string(Variant v) noexcept;
/// Accepts "unbiased" or "classical"; throws ConfigError otherwise.
Variant parse_variant(const std::string& s);

struct EsParams {
    double k = 0.005;
    double lambda = 0.005;
    double omega_h = 0.015;
    double alpha0 = 1.0;
    double epsilon = 1e-4;
    Variant variant = Variant::Unbiased;

    void validate() const;
};

struct EsRunConfig {
    QuadraticMap map;
    DelayModel delay;
    DitherConfig dither;
    EsParams params;
    Vec theta0;
    double q0 = 0.0;
    std::int64_t horizon = 0;
    /// Overrides the delay model's own seed when set.
    std::optional<std::uint64_t> seed;
    std::int64_t decimation = 1;
    /// Full-rate records kept at the end of a run: min(2T, this).
    std::int64_t tail_cap = 200000;
    /// |θ̂ − θ*| above this (or non-finite) ends the run as diverged.
    double divergence_limit = 1e8;
    /// Stop the unbiased loop once the dither α·min aᵢ drops below what θ̂ can resolve.
    bool stop_at_resolution = false;

    /// Builds the dither from `amplitudes`, params.epsilon and delay.d_max().
    /// decimation <= 0 selects 1000 for horizons above 10⁶ and 1 otherwise.
    static EsRunConfig make(QuadraticMap map, DelayModel delay, Vec amplitudes, EsParams params, Vec theta0,
                            double q0, std::int64_t horizon, std::optional<std::uint64_t> seed = std::nullopt,
                            std::int64_t decimation = 0);

    int d_max() const noexcept { return delay.d_max(); }
    GainSchedule gain_schedule() const noexcept;
    std::uint64_t effective_seed() const noexcept { return seed ? *seed : delay.seed(); }
};

enum class RunStatus { Completed, PrecisionFloor, ResolutionFloor, Diverged, Stopped };

const char* to_string(RunStatus s) noexcept;

/// Loop state at the start of step j. θ̂, η and α refer to step j; `theta` holds the
/// input most recently applied (step j−1) until the next step overwrites it.
struct EsState {
    std::int64_t j = 0;
    Vec theta_hat;
    Vec theta;
    double eta = 0.0;
    GainTracker gain;
    Xoshiro256 rng;
    InputHistory history;
    Vec sines;
    /// j mod T, advanced with j.
    std::int64_t phase = 0;
    /// 2/aᵢ
    Vec demod_scale;

    explicit EsState(const EsRunConfig& cfg);
    double alpha() const noexcept { return gain.value(); }
};

/// What step j measured and the pre-update estimator values at j.
struct StepView {
    std::int64_t j = 0;
    const Vec* theta_hat = nullptr;
    const Vec* theta = nullptr;
    double y = 0.0;
    double eta = 0.0;
    double alpha = 0.0;
    double err = 0.0;
    int delay = 0;
};

struct StepOutcome {
    RunStatus status = RunStatus::Completed;
    double y = 0.0;
    double eta = 0.0;
    double alpha = 0.0;
    double err = 0.0;
    int delay = 0;
};

/// One step of the unbiased loop: applies θ(j), measures y(j), then updates θ̂ and η
/// to j+1. Returns PrecisionFloor without touching the state once α(j) < 1e-280.
/// `theta_hat_j` receives θ̂(j) before the update.
StepOutcome step_unbiased(EsState& state, const EsRunConfig& cfg, Vec& theta_hat_j);
/// Same with α ≡ 1 and η ≡ 0.
StepOutcome step_classical(EsState& state, const EsRunConfig& cfg, Vec& theta_hat_j);

struct RunResult {
    RunStatus status = RunStatus::Completed;
    std::int64_t steps = 0;
    std::string message;
};

/// Runs the configured loop for cfg.horizon steps and hands every step to `sink`.
/// A sink returning bool stops the run (status Stopped) by returning false.
template <class Sink>
RunResult run_with(const EsRunConfig& cfg, Sink&& sink) {
    EsState state(cfg);
    Vec theta_hat_j(cfg.map.dim());
    const bool unbiased = cfg.params.variant == Variant::Unbiased;
    RunResult result;
    for (std::int64_t j = 0; j < cfg.horizon; ++j) {
        const StepOutcome out =
            unbiased ? step_unbiased(state, cfg, theta_hat_j) : step_classical(state, cfg, theta_hat_j);
        if (out.status == RunStatus::PrecisionFloor) {
            result.status = out.status;
            result.message = "gain exhausted at step " + std::to_string(j);
            break;
        }
        const StepView view{j, &theta_hat_j, &state.theta, out.y, out.eta, out.alpha, out.err, out.delay};
        result.steps = j + 1;
        if constexpr (std::is_same_v<std::invoke_result_t<Sink&, const StepView&>, bool>) {
            if (!sink(view)) {
                result.status = RunStatus::Stopped;
                result.message = "stopped by observer at step " + std::to_string(j);
                break;
            }
        } else {
            sink(view);
        }
        if (out.status != RunStatus::Completed) {
            result.status = out.status;
            result.message = std::string(to_string(out.status)) + " at step " + std::to_string(j);
            break;
        }
    }
    return result;
}

struct TrajectoryRecord {
    std::int64_t j = 0;
    Vec theta_hat;
    Vec theta;
    double y = 0.0;
    double eta = 0.0;
    double alpha = 0.0;
    double err = 0.0;
    /// Largest err over the steps folded into this record (since the previous one).
    double window_max_err = 0.0;
};

struct Trajectory {
    int n = 0;
    std::int64_t decimation = 1;
    std::vector<TrajectoryRecord> records;
    /// Last full-rate steps, oldest first.
    std::vector<TrajectoryRecord> tail;
    double max_err = 0.0;
    RunResult result;
};

/// Sink storing every `decimation`-th step plus a full-rate tail ring.
class TrajectoryRecorder {
public:
    TrajectoryRecorder(int n, std::int64_t decimation, std::int64_t tail_capacity);

    void operator()(const StepView& v);
    Trajectory finish(RunResult result);

private:
    Trajectory traj_;
    std::vector<TrajectoryRecord> ring_;
    std::size_t ring_next_ = 0;
    std::size_t ring_size_ = 0;
    double window_max_ = 0.0;
};

Trajectory run(const EsRunConfig& cfg);

/// Simulates the estimation errors θ̃ = θ̂ − θ*, η̃ = η − Q* directly, with the map
/// seen only through ½|·|²_H of the input error. The returned records hold θ̃ in
/// theta_hat, the input error θ − θ* in theta, y − Q* in y and η̃ in eta.
Trajectory run_error_system(const EsRunConfig& cfg);

struct TransformPoint {
    std::int64_t j = 0;
    Vec g;
    Vec z;
};

/// G(j) and z(j) = θ̃(j) − G(j) at every record of a trajectory produced by `run`.
/// Unbiased: G = ρ₁θ̃ + ρ₂α⁻¹η̃ + ρ₃α + ρ₄α⁻¹|θ̃|²_H. Classical: G = ρ₁θ̃ − ρ₂Q* + ρ₃ + ρ₄|θ̃|²_H.
/// G = 0 for j < D_M.
std::vector<TransformPoint> transform_diagnostics(const Trajectory& traj, const EsRunConfig& cfg);

/// Header j, theta_hat_1..n, theta_1..n, y, eta, alpha, err; values with 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
std::string format_double(double v);

}  // namespace esd
