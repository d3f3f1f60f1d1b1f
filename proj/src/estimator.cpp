#include "esd/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "esd/errors.hpp"

namespace esd {

const char* to_string(Variant v) noexcept { return v == Variant::Unbiased ? "unbiased" : "classical"; }

Variant parse_variant(const std::string& s) {
    if (s == "unbiased") return Variant::Unbiased;
    if (s == "classical") return Variant::Classical;
    throw ConfigError("variant must be \"unbiased\" or \"classical\", got \"" + s + "\"");
}

const char* to_string(RunStatus s) noexcept {
    switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::PrecisionFloor: return "precision floor";
    case RunStatus::ResolutionFloor: return "resolution floor";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Stopped: return "stopped";
    }
    return "unknown";
}

void EsParams::validate() const {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("gains.k must be nonnegative");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("dither.epsilon must be positive");
    if (variant == Variant::Unbiased) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("gains.lambda must be nonnegative");
        if (!(omega_h >= 0.0) || !std::isfinite(omega_h)) throw ConfigError("gains.omega_h must be nonnegative");
        if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ConfigError("gains.alpha0 must be positive");
    }
}

EsRunConfig EsRunConfig::make(QuadraticMap map, DelayModel delay, Vec amplitudes, EsParams params, Vec theta0,
                              double q0, std::int64_t horizon, std::optional<std::uint64_t> seed,
                              std::int64_t decimation) {
    params.validate();
    if (static_cast<std::size_t>(amplitudes.size()) != map.dim())
        throw ConfigError("dither.amplitudes must have " + std::to_string(map.dim()) + " entries");
    if (static_cast<std::size_t>(theta0.size()) != map.dim())
        throw ConfigError("run.theta0 must have " + std::to_string(map.dim()) + " entries");
    if (!theta0.allFinite()) throw ConfigError("run.theta0 must be finite");
    if (horizon < 0) throw ConfigError("run.horizon must be nonnegative");
    if (decimation <= 0) decimation = horizon > 1000000 ? 1000 : 1;
    DitherConfig dither(std::move(amplitudes), params.epsilon, delay.d_max());
    return EsRunConfig{std::move(map), std::move(delay), std::move(dither), params, std::move(theta0), q0,
                       horizon, seed, decimation};
}

GainSchedule EsRunConfig::gain_schedule() const noexcept {
    if (params.variant == Variant::Classical) return {1.0, 0.0, params.epsilon};
    return {params.alpha0, params.lambda, params.epsilon};
}

EsState::EsState(const EsRunConfig& cfg)
    : theta_hat(cfg.theta0),
      theta(cfg.theta0),
      eta(cfg.params.variant == Variant::Unbiased ? cfg.q0 : 0.0),
      gain(cfg.gain_schedule()),
      rng(cfg.effective_seed()),
      history(cfg.map.dim(), cfg.d_max()),
      sines(Vec::Zero(static_cast<Eigen::Index>(cfg.map.dim()))),
      demod_scale(2.0 * cfg.dither.amplitudes().cwiseInverse()) {}

namespace {

// Headroom above one ulp of θ̂ that the dither must keep to carry gradient information.
constexpr double kResolutionFactor = 1e3;

template <bool Unbiased>
StepOutcome step_impl(EsState& st, const EsRunConfig& cfg, Vec& theta_hat_j) {
    const int d_max = cfg.d_max();
    const Eigen::Index n = st.theta_hat.size();
    const double alpha = Unbiased ? st.alpha() : 1.0;
    StepOutcome out;
    if (Unbiased && st.j >= d_max && st.gain.exhausted()) {
        out.status = RunStatus::PrecisionFloor;
        return out;
    }
    cfg.dither.sines_reduced(st.phase, st.sines);
    const double* sn = st.sines.data();
    double* th = st.theta_hat.data();
    if (st.j <= d_max) {
        st.theta = cfg.theta0;
    } else {
        const double* a = cfg.dither.amplitudes().data();
        double* in = st.theta.data();
        for (Eigen::Index i = 0; i < n; ++i) in[i] = th[i] + alpha * a[i] * sn[i];
    }
    st.history.push(st.j, st.theta);
    out.delay = sample_delay(cfg.delay, st.j, st.rng);
    out.y = measure(cfg.map, st.history, st.j, out.delay, d_max);
    out.eta = Unbiased ? st.eta : 0.0;
    out.alpha = alpha;
    const double* ts = cfg.map.theta_star().data();
    double e2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) e2 += (th[i] - ts[i]) * (th[i] - ts[i]);
    out.err = std::sqrt(e2);
    theta_hat_j = st.theta_hat;

    if (st.j >= d_max) {
        const double eps = cfg.params.epsilon;
        const double* ms = st.demod_scale.data();
        if constexpr (Unbiased) {
            const double innovation = out.y - st.eta;
            const double bracket = eps * cfg.params.k * innovation;
            // Bracket first, 1/α last: the innovation decays like α² while 1/α grows.
            for (Eigen::Index i = 0; i < n; ++i) th[i] -= bracket * (ms[i] * sn[i]) / alpha;
            st.eta += eps * cfg.params.omega_h * innovation;
            if (cfg.stop_at_resolution) {
                double scale = 1.0;
                for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(th[i]));
                if (alpha * cfg.dither.amplitudes().minCoeff() <
                    kResolutionFactor * std::numeric_limits<double>::epsilon() * scale)
                    out.status = RunStatus::ResolutionFloor;
            }
        } else {
            const double bracket = eps * cfg.params.k * out.y;
            for (Eigen::Index i = 0; i < n; ++i) th[i] -= bracket * (ms[i] * sn[i]);
        }
    }

    if (!std::isfinite(out.err) || out.err > cfg.divergence_limit) out.status = RunStatus::Diverged;
    if constexpr (Unbiased) st.gain.advance();
    ++st.j;
    if (++st.phase == cfg.dither.period()) st.phase = 0;
    return out;
}

}  // namespace

StepOutcome step_unbiased(EsState& st, const EsRunConfig& cfg, Vec& theta_hat_j) {
    return step_impl<true>(st, cfg, theta_hat_j);
}

StepOutcome step_classical(EsState& st, const EsRunConfig& cfg, Vec& theta_hat_j) {
    return step_impl<false>(st, cfg, theta_hat_j);
}

TrajectoryRecorder::TrajectoryRecorder(int n, std::int64_t decimation, std::int64_t tail_capacity) {
    if (decimation < 1) throw std::invalid_argument("TrajectoryRecorder: decimation must be >= 1");
    traj_.n = n;
    traj_.decimation = decimation;
    TrajectoryRecord blank;
    blank.theta_hat = Vec::Zero(n);
    blank.theta = Vec::Zero(n);
    ring_.assign(static_cast<std::size_t>(std::max<std::int64_t>(tail_capacity, 0)), blank);
}

void TrajectoryRecorder::operator()(const StepView& v) {
    window_max_ = std::max(window_max_, v.err);
    traj_.max_err = std::max(traj_.max_err, v.err);
    if (!ring_.empty()) {
        TrajectoryRecord& r = ring_[ring_next_];
        r.j = v.j;
        r.theta_hat = *v.theta_hat;
        r.theta = *v.theta;
        r.y = v.y;
        r.eta = v.eta;
        r.alpha = v.alpha;
        r.err = v.err;
        r.window_max_err = v.err;
        ring_next_ = (ring_next_ + 1) % ring_.size();
        ring_size_ = std::min(ring_size_ + 1, ring_.size());
    }
    if (v.j % traj_.decimation == 0) {
        traj_.records.push_back(
            TrajectoryRecord{v.j, *v.theta_hat, *v.theta, v.y, v.eta, v.alpha, v.err, window_max_});
        window_max_ = 0.0;
    }
}

Trajectory TrajectoryRecorder::finish(RunResult result) {
    traj_.result = std::move(result);
    traj_.tail.clear();
    traj_.tail.reserve(ring_size_);
    const std::size_t start = (ring_next_ + ring_.size() - ring_size_) % std::max<std::size_t>(ring_.size(), 1);
    for (std::size_t i = 0; i < ring_size_; ++i) traj_.tail.push_back(ring_[(start + i) % ring_.size()]);
    return std::move(traj_);
}

namespace {

std::int64_t tail_capacity(const EsRunConfig& cfg) {
    return std::min<std::int64_t>({2 * cfg.dither.period(), cfg.tail_cap, cfg.horizon});
}

}  // namespace

Trajectory run(const EsRunConfig& cfg) {
    TrajectoryRecorder rec(static_cast<int>(cfg.map.dim()), cfg.decimation, tail_capacity(cfg));
    RunResult result = run_with(cfg, rec);
    return rec.finish(std::move(result));
}

Trajectory run_error_system(const EsRunConfig& cfg) {
    const int n = static_cast<int>(cfg.map.dim());
    const int d_max = cfg.d_max();
    const bool unbiased = cfg.params.variant == Variant::Unbiased;
    const Vec& a = cfg.dither.amplitudes();
    const double eps = cfg.params.epsilon;
    const double k = cfg.params.k;
    const double q_star = cfg.map.q_star();
    const Vec theta0_err = cfg.theta0 - cfg.map.theta_star();

    // The error system only sees the map through ½|·|²_H, so evaluate against a map centred at 0.
    const QuadraticMap err_map(Vec::Zero(n), 0.0, cfg.map.hessian());

    Vec theta_err = theta0_err;
    double eta_err = unbiased ? cfg.q0 - q_star : -q_star;
    GainTracker gain(cfg.gain_schedule());
    Xoshiro256 rng(cfg.effective_seed());
    InputHistory history(static_cast<std::size_t>(n), d_max);
    Vec sines(n);
    Vec input_err(n);
    Vec current_err(n);

    TrajectoryRecorder rec(n, cfg.decimation, tail_capacity(cfg));
    RunResult result;
    for (std::int64_t j = 0; j < cfg.horizon; ++j) {
        const double alpha = gain.value();
        if (unbiased && j >= d_max && gain.exhausted()) {
            result.status = RunStatus::PrecisionFloor;
            result.message = "gain exhausted at step " + std::to_string(j);
            break;
        }
        cfg.dither.sines(j, sines);
        // θ̃(j) + α(j)S(j): the input error that the undelayed loop would see now.
        for (int i = 0; i < n; ++i) current_err(i) = theta_err(i) + alpha * a(i) * sines(i);
        input_err = j <= d_max ? theta0_err : current_err;
        history.push(j, input_err);
        const int delay = sample_delay(cfg.delay, j, rng);
        const double y_shift = j < d_max ? -q_star : measure(err_map, history, j, delay, d_max);

        const Vec theta_err_j = theta_err;
        const double eta_err_j = eta_err;
        if (j >= d_max) {
            if (unbiased) {
                const double undelayed = err_map.half_quadratic(current_err);
                const double b1 = y_shift - undelayed;
                const double b2 = undelayed - eta_err;
                for (int i = 0; i < n; ++i) {
                    const double m = 2.0 * sines(i) / a(i);
                    theta_err(i) -= eps * k * m / alpha * b1;
                    theta_err(i) -= eps * k * m / alpha * b2;
                }
                eta_err -= eps * cfg.params.omega_h * (eta_err - y_shift);
            } else {
                for (int i = 0; i < n; ++i) {
                    const double m = 2.0 * sines(i) / a(i);
                    theta_err(i) -= eps * k * m * (q_star + y_shift);
                }
            }
        }
        const double err = theta_err_j.norm();
        rec(StepView{j, &theta_err_j, &input_err, y_shift, eta_err_j, alpha, err, delay});
        result.steps = j + 1;
        gain.advance();
        if (!std::isfinite(err) || err > cfg.divergence_limit) {
            result.status = RunStatus::Diverged;
            result.message = "diverged at step " + std::to_string(j);
            break;
        }
    }
    return rec.finish(std::move(result));
}

std::vector<TransformPoint> transform_diagnostics(const Trajectory& traj, const EsRunConfig& cfg) {
    std::vector<TransformPoint> out;
    if (traj.records.empty()) return out;
    const int n = traj.n;
    const int d_max = cfg.d_max();
    const bool unbiased = cfg.params.variant == Variant::Unbiased;
    const Mat& h = cfg.map.hessian();
    const double q_star = cfg.map.q_star();
    RhoTracker rho(cfg.dither, cfg.params.k, h, traj.records.front().j);
    out.reserve(traj.records.size());
    for (const TrajectoryRecord& r : traj.records) {
        TransformPoint p;
        p.j = r.j;
        const Vec theta_err = r.theta_hat - cfg.map.theta_star();
        if (r.j < d_max) {
            p.g = Vec::Zero(n);
        } else {
            rho.advance_to(r.j);
            const RhoValues& v = rho.value();
            const double quad = theta_err.dot(h * theta_err);
            if (unbiased) {
                const double eta_err = r.eta - q_star;
                p.g = v.rho1 * theta_err + v.rho2 * (eta_err / r.alpha) + v.rho3 * r.alpha +
                      v.rho4 * (quad / r.alpha);
            } else {
                p.g = v.rho1 * theta_err - v.rho2 * q_star + v.rho3 + v.rho4 * quad;
            }
        }
        p.z = theta_err - p.g;
        out.push_back(std::move(p));
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "j";
    for (int i = 1; i <= traj.n; ++i) os << ",theta_hat_" << i;
    for (int i = 1; i <= traj.n; ++i) os << ",theta_" << i;
    os << ",y,eta,alpha,err\n";
    for (const TrajectoryRecord& r : traj.records) {
        os << r.j;
        for (int i = 0; i < traj.n; ++i) os << ',' << format_double(r.theta_hat(i));
        for (int i = 0; i < traj.n; ++i) os << ',' << format_double(r.theta(i));
        os << ',' << format_double(r.y) << ',' << format_double(r.eta) << ',' << format_double(r.alpha) << ','
           << format_double(r.err) << '\n';
    }
}

}  // namespace esd
