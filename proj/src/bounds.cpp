#include "esd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "esd/dither.hpp"
#include "esd/errors.hpp"

namespace esd {

namespace stable {

// The chain is evaluated at ε down to 1e-16, where 1 − ελ rounds to 1 and literal
// differences of |1−x| terms cancel to zero. For x, y ≤ 1 the forms below are the
// same algebra without the cancellation; outside that range the literal |·| is used.

double pow_one_minus(double x, double p) {
    if (x < 1.0) return std::exp(p * std::log1p(-x));
    return std::pow(std::abs(1.0 - x), p);
}

double abs_diff(double x, double y) {
    if (x <= 1.0 && y <= 1.0) return y - x;
    return std::abs(1.0 - x) - std::abs(1.0 - y);
}

double sq_abs_diff(double x, double y) {
    if (x <= 1.0 && y <= 1.0) return (y - 2.0 * x) + x * x;
    const double ax = std::abs(1.0 - x);
    return ax * ax - std::abs(1.0 - y);
}

double one_minus_abs(double x) {
    if (x <= 1.0) return x;
    return 1.0 - std::abs(1.0 - x);
}

}  // namespace stable

const char* to_string(DelayRegime r) noexcept { return r == DelayRegime::Delayed ? "delayed" : "delay_free"; }

BoundInputs BoundInputs::at(double epsilon_star, double sigma_value) const {
    BoundInputs copy = *this;
    copy.epsilon = epsilon_star;
    copy.sigma = sigma_value;
    return copy;
}

namespace {

void check_inputs(const BoundInputs& in) {
    if (in.n < 1 || in.amplitudes.size() != in.n) throw ConfigError("bounds: amplitudes must have n entries");
    if (!(in.epsilon > 0.0)) throw ConfigError("bounds: epsilon must be positive");
    if (in.d_max < 0) throw ConfigError("bounds: d_max must be nonnegative");
    for (Eigen::Index i = 0; i < in.amplitudes.size(); ++i)
        if (!(in.amplitudes(i) > 0.0)) throw ConfigError("bounds: amplitudes must be positive");
}

double sum_sq(const Vec& a) { return a.squaredNorm(); }
double inv_norm(const Vec& a) { return a.cwiseInverse().norm(); }

}  // namespace

RhoBars rho_bars_delayed(const BoundInputs& in) {
    check_inputs(in);
    if (in.d_max == 0) throw RegimeError("delayed bounds need D_M >= 1; use the delay-free bounds for D_M = 0");
    const int n = in.n;
    const double d = in.d_max;
    const double nd = n * d;
    const double se = std::sqrt(in.epsilon);
    const double h_max = in.uncertainty.h_max;
    const Vec& a = in.amplitudes;

    double s1 = 0.0;
    double s_inv_ia = 0.0;
    double s_c = 0.0;
    for (int i = 1; i <= n; ++i) {
        s1 += 1.0 / i;
        for (int l = 1; l <= n; ++l) {
            if (l == i) continue;
            s1 += a(l - 1) / a(i - 1) * (1.0 / std::abs(i - l) + 1.0 / (i + l));
        }
        s_inv_ia += 1.0 / (i * a(i - 1));
        const double q = 3.3072 * std::numbers::pi * i;
        const double c = (nd + se) * (2.0 * nd + se) / 12.0 + (se * (se + nd) + d * d * n * n * (1.0 + 1.0 / q)) / q;
        s_c += c * c / (a(i - 1) * a(i - 1));
    }
    return {0.19245 * nd * in.k * h_max * s1, 0.3849 * nd * in.k * s_inv_ia,
            in.k * h_max * sum_sq(a) * std::sqrt(s_c), 0.19245 * nd * in.k * s_inv_ia};
}

RhoBars rho_bars_delay_free(const BoundInputs& in) {
    check_inputs(in);
    const int n = in.n;
    const double h_max = in.uncertainty.h_max;
    const Vec& a = in.amplitudes;
    const double t = 2.0 * n + 1.0;
    auto w = [&](int i) { return 2.0 * std::numbers::pi * i / t; };

    double s1 = 0.0;
    double s2 = 0.0;
    double s_c = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double wi = w(i);
        s1 += 1.0 / std::abs(std::sin(wi));
        for (int l = 1; l <= n; ++l) {
            if (l == i) continue;
            const double wl = w(l);
            s1 += a(l - 1) / a(i - 1) *
                  (1.0 / std::abs(std::sin((wi - wl) / 2.0)) + 1.0 / std::abs(std::sin((wi + wl) / 2.0)));
        }
        s2 += 1.0 / (a(i - 1) * std::abs(std::sin(wi / 2.0)));
        const double c = (n + 1.0) * (4.0 * n + 3.0) / 6.0 +
                         (std::abs(std::cos(wi) / std::sin(wi)) + 2.0 * n + 2.0 + 1.0 / t) / (4.0 * std::abs(std::sin(wi)));
        s_c += c * c / (a(i - 1) * a(i - 1));
    }
    return {in.k * h_max / 2.0 * s1, in.k * s2, in.k * h_max * sum_sq(a) * std::sqrt(s_c), in.k / 2.0 * s2};
}

RhoBars rho_bars(const BoundInputs& in) {
    return in.regime == DelayRegime::Delayed ? rho_bars_delayed(in) : rho_bars_delay_free(in);
}

namespace {

void require_positive(const char* name, double value) {
    if (!(value > 0.0)) throw ChainUndefined(name, value);
}

// 2π/((1−√ε)D)·(π√ε/((1−√ε)D) + 1), shared by both delayed Δ̄_out forms.
double dither_shift_term(double se, int d_max) {
    const double base = (1.0 - se) * d_max;
    require_positive("(1-sqrt(eps))*D_M", base);
    return 2.0 * std::numbers::pi / base * (std::numbers::pi * se / base + 1.0);
}

}  // namespace

FilterBounds filter_bounds_theorem1(const BoundInputs& in) {
    const double eps = in.epsilon;
    const double d = in.regime == DelayRegime::Delayed ? in.d_max : 0.0;
    const double lam = in.lambda, wh = in.omega_h;
    const double eta_den = stable::sq_abs_diff(eps * lam, eps * wh);
    require_positive("|1-eps*lambda|^2 - |1-eps*omega_h|", eta_den);
    require_positive("|1-eps*lambda|", std::abs(1.0 - eps * lam));

    const double spread = in.sigma + in.alpha0 * in.amplitudes.norm();
    FilterBounds fb;
    fb.sigma_y = in.uncertainty.h_max / 2.0 * stable::pow_one_minus(eps * lam, -2.0 * d) * spread * spread;
    fb.sigma_eta = in.uncertainty.delta_q * stable::pow_one_minus(eps * wh, -d) + eps * wh * fb.sigma_y / eta_den;
    return fb;
}

BoundChain chain_theorem1(const BoundInputs& in) {
    require_positive("alpha0", in.alpha0);
    const double eps = in.epsilon;
    const double se = std::sqrt(eps);
    const bool delayed = in.regime == DelayRegime::Delayed;
    const double d = delayed ? in.d_max : 0.0;
    const double k = in.k, lam = in.lambda, wh = in.omega_h, a0 = in.alpha0, sigma = in.sigma;
    const double h_max = in.uncertainty.h_max;
    const double norm_a = std::sqrt(sum_sq(in.amplitudes));
    const double inv_a = inv_norm(in.amplitudes);

    BoundChain c;
    c.rho_bar = rho_bars(in);
    const auto [r1, r2, r3, r4] = c.rho_bar;

    const double decay_lam = std::abs(1.0 - eps * lam);
    const double decay_h = std::abs(1.0 - eps * wh);
    const FilterBounds fb = filter_bounds_theorem1(in);
    c.sigma_y = fb.sigma_y;
    c.sigma_eta = fb.sigma_eta;

    const double spread = sigma + a0 * norm_a;
    c.delta = 2.0 * k / a0 * (h_max / 2.0 * spread * spread + c.sigma_eta) * inv_a;
    if (delayed) {
        const double inner = 2.0 * se * k * (c.sigma_y + c.sigma_eta) / a0 * inv_a +
                             a0 * norm_a * (lam * se + dither_shift_term(se, in.d_max)) / decay_lam;
        c.delta_out = k * d * h_max / a0 * inv_a * spread * (1.0 + stable::pow_one_minus(eps * lam, -d)) * inner;
    }
    c.delta_g = r1 * sigma + r2 * c.sigma_eta / a0 + r3 * a0 + r4 * sigma * sigma * h_max / a0;
    const double x = c.delta + se * c.delta_out;
    const double sx = sigma + eps * x;
    c.delta_y = k * h_max * c.delta_g + r1 * x + wh * r2 / a0 * (c.sigma_y + c.sigma_eta) +
                r2 * lam * (c.sigma_eta * decay_h + eps * wh * c.sigma_y) / (a0 * decay_lam) + r3 * a0 * lam +
                2.0 * r4 * sigma / a0 * h_max * x + c.delta_out + eps * r4 / a0 * h_max * x * x +
                r4 / a0 * lam / decay_lam * h_max * sx * sx;
    return c;
}

BoundChain chain_theorem2(const BoundInputs& in) {
    const double eps = in.epsilon;
    const double se = std::sqrt(eps);
    const bool delayed = in.regime == DelayRegime::Delayed;
    const double k = in.k, sigma = in.sigma;
    const double h_max = in.uncertainty.h_max;
    const double q_bound = in.uncertainty.q0 + in.uncertainty.delta_q;
    const double norm_a = std::sqrt(sum_sq(in.amplitudes));
    const double inv_a = inv_norm(in.amplitudes);

    BoundChain c;
    c.rho_bar = rho_bars(in);
    const auto [r1, r2, r3, r4] = c.rho_bar;

    const double spread = sigma + norm_a;
    c.sigma_y = h_max / 2.0 * spread * spread;
    c.delta = 2.0 * k * (c.sigma_y + q_bound) * inv_a;
    if (delayed) {
        c.delta_out = 2.0 * k * in.d_max * h_max * inv_a * spread *
                      (se * c.delta + norm_a * dither_shift_term(se, in.d_max));
    }
    c.delta_g = r1 * sigma + r2 * q_bound + r3 + r4 * sigma * sigma * h_max;
    const double x = c.delta + se * c.delta_out;
    c.delta_y = k * h_max * c.delta_g + r1 * x + 2.0 * r4 * sigma * h_max * x + c.delta_out + eps * r4 * h_max * x * x;
    return c;
}

BoundChain chain_for(const BoundInputs& in) {
    return in.variant == Variant::Unbiased ? chain_theorem1(in) : chain_theorem2(in);
}

const Margin* FeasibilityCheck::tightest() const {
    if (margins.empty()) return nullptr;
    return &*std::min_element(margins.begin(), margins.end(),
                              [](const Margin& a, const Margin& b) { return a.value < b.value; });
}

namespace {

FeasibilityCheck conclude(FeasibilityCheck r, double strict) {
    r.feasible = true;
    for (const Margin& m : r.margins) {
        if (!(m.value > strict)) {
            r.feasible = false;
            if (r.reason.empty()) r.reason = "condition " + m.name + " violated";
        }
    }
    return r;
}

// n·D_M·⌊1/√ε⌋ − (2n+1), as a margin that is positive when the period law is met.
Margin period_margin(const BoundInputs& in) {
    const double lhs = static_cast<double>(in.n) * in.d_max * static_cast<double>(floor_inv_sqrt(in.epsilon));
    // ≥ is required, so shift by one half to express it as a strict margin on integers.
    return {"period", lhs - (2.0 * in.n + 1.0) + 0.5};
}

// A vanishing chain (k = 0) leaves 0/0 here; the term is then 0.
double tail_term(double numerator, double den) { return numerator == 0.0 ? 0.0 : numerator / den; }

}  // namespace

FeasibilityCheck feasible_theorem1(const BoundInputs& in, double strict) {
    FeasibilityCheck r;
    const double eps = in.epsilon;
    const double lam = in.lambda;
    const double kh = in.k * in.uncertainty.h_min;
    const bool delayed = in.regime == DelayRegime::Delayed;

    if (delayed) r.margins.push_back(period_margin(in));
    r.margins.push_back({"step", 2.0 - eps * std::max(lam + kh, in.omega_h + 2.0 * lam - eps * lam * lam)});
    if (!(in.sigma > in.uncertainty.sigma0)) {
        r.margins.push_back({"sigma", in.uncertainty.sigma0 - in.sigma});
        return conclude(std::move(r), strict);
    }
    BoundChain c;
    try {
        c = chain_theorem1(in);
    } catch (const ChainUndefined& e) {
        r.feasible = false;
        r.reason = e.what();
        return r;
    }
    const double den = stable::abs_diff(eps * lam, eps * kh);
    if (!(den > 0.0) && c.delta_y != 0.0) {
        r.feasible = false;
        r.reason = "denominator |1-eps*lambda| - |1-eps*k*H_m| is not positive";
        r.chain = c;
        return r;
    }
    const double se = std::sqrt(eps);
    const double s0 = in.uncertainty.sigma0;
    double lhs;
    if (delayed) {
        const double d = in.d_max;
        lhs = (s0 + se * c.delta_g * stable::pow_one_minus(eps * lam, d)) * stable::pow_one_minus(eps * kh, -d) +
              se * c.delta_g + tail_term(se * se * se * c.delta_y, den);
    } else {
        lhs = s0 + 2.0 * eps * c.delta_g + tail_term(eps * eps * c.delta_y, den);
    }
    r.margins.push_back({"sigma", in.sigma - lhs});
    r.chain = c;
    return conclude(std::move(r), strict);
}

FeasibilityCheck feasible_theorem2(const BoundInputs& in, double strict) {
    FeasibilityCheck r;
    const double eps = in.epsilon;
    const double kh = in.k * in.uncertainty.h_min;
    const bool delayed = in.regime == DelayRegime::Delayed;

    if (delayed) r.margins.push_back(period_margin(in));
    r.margins.push_back({"step", 2.0 - eps * kh});
    if (!(in.sigma > in.uncertainty.sigma0)) {
        r.margins.push_back({"sigma", in.uncertainty.sigma0 - in.sigma});
        return conclude(std::move(r), strict);
    }
    BoundChain c;
    try {
        c = chain_theorem2(in);
    } catch (const ChainUndefined& e) {
        r.feasible = false;
        r.reason = e.what();
        return r;
    }
    const double s0 = in.uncertainty.sigma0;
    const double se = std::sqrt(eps);
    double lhs;
    // λ = 0 in the classical case, so the shared denominator reduces to 1 − |1−εkH_m|.
    const double den = stable::one_minus_abs(eps * kh);
    if (!(den > 0.0) && c.delta_y != 0.0) {
        r.feasible = false;
        r.reason = "denominator 1 - |1-eps*k*H_m| is not positive";
        r.chain = c;
        return r;
    }
    if (delayed) {
        lhs = (s0 + se * c.delta_g) * stable::pow_one_minus(eps * kh, -static_cast<double>(in.d_max)) +
              se * c.delta_g + tail_term(se * se * se * c.delta_y, den);
    } else {
        lhs = s0 + 2.0 * eps * c.delta_g + tail_term(eps * eps * c.delta_y, den);
    }
    r.margins.push_back({"sigma", in.sigma - lhs});
    r.chain = c;
    return conclude(std::move(r), strict);
}

FeasibilityCheck feasible_for(const BoundInputs& in, double strict) {
    return in.variant == Variant::Unbiased ? feasible_theorem1(in, strict) : feasible_theorem2(in, strict);
}

double ultimate_bound_radius(const BoundInputs& in, const BoundChain& chain) {
    const double eps = in.epsilon;
    const double den = stable::one_minus_abs(eps * in.k * in.uncertainty.h_min);
    if (!(den > 0.0)) throw ChainUndefined("1-|1-eps*k*H_m|", den);
    const double scale = in.regime == DelayRegime::Delayed ? std::sqrt(eps) : eps;
    return scale * (chain.delta_g + eps * chain.delta_y / den);
}

double region_for_local_map(double sigma1, double alpha0, const Vec& amplitudes) {
    const double sigma = sigma1 - alpha0 * amplitudes.norm();
    if (!(sigma > 0.0)) throw std::domain_error("empty region: sigma1 <= alpha0*|a|");
    return sigma;
}

}  // namespace esd
