#include "esd/dither.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "esd/errors.hpp"

namespace esd {

std::int64_t floor_inv_sqrt(double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive and finite");
    if (epsilon < 1e-30) throw ConfigError("epsilon below 1e-30 is not supported");
    auto q = static_cast<std::int64_t>(std::floor(1.0 / std::sqrt(epsilon)));
    const auto sq = [](std::int64_t v) { return static_cast<double>(v) * static_cast<double>(v); };
    while (q > 0 && sq(q) * epsilon > 1.0) --q;
    while (sq(q + 1) * epsilon <= 1.0) ++q;
    return q;
}

std::int64_t make_period(int n, int d_max, double epsilon) {
    if (n < 1) throw ConfigError("dimension n must be at least 1");
    if (d_max < 0) throw ConfigError("d_max must be nonnegative");
    const std::int64_t q = floor_inv_sqrt(epsilon);
    const std::int64_t floor_period = 2 * static_cast<std::int64_t>(n) + 1;
    const std::int64_t nd = static_cast<std::int64_t>(n) * d_max;
    if (nd == 0) return floor_period;
    if (q > std::numeric_limits<std::int64_t>::max() / 4 / nd)
        throw ConfigError("dither period overflows for epsilon " + std::to_string(epsilon));
    return std::max(nd * q, floor_period);
}

DitherConfig::DitherConfig(Vec amplitudes, double epsilon, int d_max)
    : amplitudes_(std::move(amplitudes)), epsilon_(epsilon), d_max_(d_max) {
    if (amplitudes_.size() == 0) throw ConfigError("dither amplitudes are empty");
    for (Eigen::Index i = 0; i < amplitudes_.size(); ++i) {
        if (!(amplitudes_(i) > 0.0) || !std::isfinite(amplitudes_(i)))
            throw ConfigError("dither amplitude a_" + std::to_string(i + 1) + " must be positive");
    }
    period_ = make_period(n(), d_max, epsilon);
    if (period_ <= kTableMax) {
        auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(period_));
        const double scale = 2.0 * std::numbers::pi / static_cast<double>(period_);
        for (std::int64_t r = 0; r < period_; ++r) (*table)[static_cast<std::size_t>(r)] = std::sin(scale * static_cast<double>(r));
        table_ = std::move(table);
    }
}

Vec DitherConfig::frequencies() const {
    Vec w(n());
    for (int i = 0; i < n(); ++i)
        w(i) = 2.0 * std::numbers::pi * (i + 1) / static_cast<double>(period_);
    return w;
}

namespace {

std::int64_t reduce(std::int64_t j, std::int64_t t) {
    const std::int64_t r = j % t;
    return r < 0 ? r + t : r;
}

}  // namespace

double DitherConfig::phase(int i, std::int64_t j) const noexcept {
    // i·(j mod T) mod T by repeated addition; T < 2^61 so the sums never overflow.
    const std::int64_t jm = reduce(j, period_);
    std::int64_t r = 0;
    for (int c = 0; c < i; ++c) r = reduce(r + jm, period_);
    return 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(period_);
}

void DitherConfig::sines(std::int64_t j, Vec& out) const { sines_reduced(reduce(j, period_), out); }

void DitherConfig::sines_reduced(std::int64_t jm, Vec& out) const {
    out.resize(n());
    const double scale = 2.0 * std::numbers::pi / static_cast<double>(period_);
    const double* table = table_ ? table_->data() : nullptr;
    std::int64_t r = 0;
    for (int i = 0; i < n(); ++i) {
        r += jm;
        if (r >= period_) r -= period_;
        out(i) = table ? table[r] : std::sin(scale * static_cast<double>(r));
    }
}

Vec dither_vec(const DitherConfig& cfg, std::int64_t j) {
    Vec s;
    cfg.sines(j, s);
    return cfg.amplitudes().cwiseProduct(s);
}

Vec demod_vec(const DitherConfig& cfg, std::int64_t j) {
    Vec s;
    cfg.sines(j, s);
    return 2.0 * s.cwiseQuotient(cfg.amplitudes());
}

GainValue gain(const GainSchedule& schedule, std::int64_t j) {
    const double x = schedule.epsilon * schedule.lambda;
    double alpha;
    if (x < 1.0)
        alpha = schedule.alpha0 * std::exp(static_cast<double>(j) * std::log1p(-x));
    else
        alpha = schedule.alpha0 * std::pow(1.0 - x, static_cast<double>(j));
    return {alpha, std::abs(alpha) < kGainFloor};
}

GainTracker::GainTracker(const GainSchedule& schedule)
    : schedule_(schedule), lambda_bar_(schedule.lambda_bar()), alpha_(schedule.alpha0) {}

void GainTracker::advance() {
    ++j_;
    if (--until_refresh_ == 0) {
        alpha_ = gain(schedule_, j_).alpha;
        until_refresh_ = kRefresh;
    } else {
        alpha_ *= lambda_bar_;
    }
}

AveragingSums averaging_sums(const DitherConfig& cfg, const Mat& hessian, std::int64_t t) {
    const int n = cfg.n();
    AveragingSums out{Vec::Zero(n), Mat::Zero(n, n), Vec::Zero(n)};
    const std::int64_t period = cfg.period();
    for (std::int64_t j = t; j < t + period; ++j) {
        const Vec s = dither_vec(cfg, j);
        const Vec m = demod_vec(cfg, j);
        out.mean_demod += m;
        out.mean_demod_dither.noalias() += m * s.transpose();
        out.mean_demod_quadratic += m * s.dot(hessian * s);
    }
    const double inv = 1.0 / static_cast<double>(period);
    out.mean_demod *= inv;
    out.mean_demod_dither *= inv;
    out.mean_demod_quadratic *= inv;
    return out;
}

CoefficientTerms coefficient_terms(const DitherConfig& cfg, double k, const Mat& hessian, std::int64_t j) {
    const Vec s = dither_vec(cfg, j);
    const Vec m = demod_vec(cfg, j);
    CoefficientTerms a;
    a.a1 = k * hessian - k * m * (s.transpose() * hessian);
    a.a2 = k * m;
    a.a3 = -0.5 * k * s.dot(hessian * s) * m;
    a.a4 = -0.5 * k * m;
    return a;
}

double RhoValues::norm(int l) const {
    switch (l) {
    case 1: {
        Eigen::JacobiSVD<Mat> svd(rho1);
        return svd.singularValues()(0);
    }
    case 2: return rho2.norm();
    case 3: return rho3.norm();
    case 4: return rho4.norm();
    default: throw std::invalid_argument("RhoValues::norm: l must be 1..4");
    }
}

RhoValues rho_exact(const DitherConfig& cfg, double k, const Mat& hessian, std::int64_t j) {
    const int n = cfg.n();
    const std::int64_t period = cfg.period();
    RhoValues r{Mat::Zero(n, n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
    for (std::int64_t i = j; i < j + period; ++i) {
        const double w = static_cast<double>(j + period - i);
        const CoefficientTerms a = coefficient_terms(cfg, k, hessian, i);
        r.rho1 += w * a.a1;
        r.rho2 += w * a.a2;
        r.rho3 += w * a.a3;
        r.rho4 += w * a.a4;
    }
    const double scale = -cfg.epsilon() / static_cast<double>(period);
    r.rho1 *= scale;
    r.rho2 *= scale;
    r.rho3 *= scale;
    r.rho4 *= scale;
    return r;
}

RhoTracker::RhoTracker(const DitherConfig& cfg, double k, const Mat& hessian, std::int64_t j0)
    : cfg_(&cfg), k_(k), hessian_(hessian), rho_(rho_exact(cfg, k, hessian, j0)), j_(j0) {}

void RhoTracker::advance() {
    const CoefficientTerms a = coefficient_terms(*cfg_, k_, hessian_, j_);
    const double eps = cfg_->epsilon();
    rho_.rho1 += eps * a.a1;
    rho_.rho2 += eps * a.a2;
    rho_.rho3 += eps * a.a3;
    rho_.rho4 += eps * a.a4;
    ++j_;
}

void RhoTracker::advance_to(std::int64_t j) {
    if (j < j_) throw std::invalid_argument("RhoTracker: cannot move backwards");
    while (j_ < j) advance();
}

std::array<double, 4> rho_period_max(const DitherConfig& cfg, double k, const Mat& hessian) {
    std::array<double, 4> worst{};
    RhoTracker tr(cfg, k, hessian, 0);
    for (std::int64_t j = 0; j < cfg.period(); ++j) {
        for (int l = 1; l <= 4; ++l)
            worst[static_cast<std::size_t>(l - 1)] = std::max(worst[static_cast<std::size_t>(l - 1)], tr.value().norm(l));
        tr.advance();
    }
    return worst;
}

}  // namespace esd
