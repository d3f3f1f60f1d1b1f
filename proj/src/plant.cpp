#include "esd/plant.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "esd/errors.hpp"

namespace esd {

QuadraticMap::QuadraticMap(Vec theta_star, double q_star, Mat hessian)
    : theta_star_(std::move(theta_star)), q_star_(q_star), hessian_(std::move(hessian)) {
    const auto n = theta_star_.size();
    if (n == 0) throw std::invalid_argument("quadratic map: theta_star is empty");
    if (hessian_.rows() != n || hessian_.cols() != n)
        throw std::invalid_argument("quadratic map: hessian must be " + std::to_string(n) + "x" +
                                    std::to_string(n));
    if (!theta_star_.allFinite() || !hessian_.allFinite() || !std::isfinite(q_star_))
        throw std::invalid_argument("quadratic map: non-finite entries");

    const double scale = hessian_.cwiseAbs().maxCoeff();
    const double asym = (hessian_ - hessian_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale)
        throw std::invalid_argument("quadratic map: hessian is not symmetric");

    Eigen::LLT<Mat> llt(hessian_);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("quadratic map: hessian is not positive definite");
}

Vec QuadraticMap::eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Mat> solver(hessian_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

double QuadraticMap::operator()(const Vec& theta) const { return eval_map(*this, theta); }

double eval_map(const QuadraticMap& map, const Vec& theta) {
    if (static_cast<std::size_t>(theta.size()) != map.dim())
        throw std::invalid_argument("eval_map: expected dimension " + std::to_string(map.dim()) +
                                    ", got " + std::to_string(theta.size()));
    const Vec offset = theta - map.theta_star();
    return map.q_star() + map.half_quadratic(offset);
}

void UncertaintyBounds::validate() const {
    if (!(h_min > 0.0)) throw ConfigError("uncertainty.h_min must be positive");
    if (!(h_max >= h_min)) throw ConfigError("uncertainty.h_max must be >= h_min");
    if (!(sigma0 > 0.0)) throw ConfigError("uncertainty.sigma0 must be positive");
    if (!(delta_q >= 0.0)) throw ConfigError("uncertainty.delta_q must be nonnegative");
    if (!std::isfinite(q0)) throw ConfigError("uncertainty.q0 must be finite");
}

DelayModel DelayModel::zero() { return DelayModel(Zero{}, 0); }

DelayModel DelayModel::constant(int d, int d_max) {
    if (d_max < 0) d_max = d;
    if (d < 0 || d > d_max) throw ConfigError("delay: constant d must lie in [0, d_max]");
    return DelayModel(Constant{d}, d_max);
}

DelayModel DelayModel::uniform(int d_max, std::uint64_t seed) {
    if (d_max < 0) throw ConfigError("delay: d_max must be nonnegative");
    return DelayModel(UniformRandom{seed}, d_max);
}

DelayModel DelayModel::sequence(std::vector<int> values, int d_max) {
    if (d_max < 0) throw ConfigError("delay: d_max must be nonnegative");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0 || values[i] > d_max)
            throw ConfigError("delay: sequence value at index " + std::to_string(i) + " outside [0, d_max]");
    }
    return DelayModel(Sequence{std::move(values)}, d_max);
}

std::uint64_t DelayModel::seed() const noexcept {
    if (const auto* u = std::get_if<UniformRandom>(&variant_)) return u->seed;
    return 0;
}

const char* DelayModel::name() const noexcept {
    switch (variant_.index()) {
    case 0: return "zero";
    case 1: return "constant";
    case 2: return "uniform";
    default: return "sequence";
    }
}

int sample_delay(const DelayModel& model, std::int64_t j, Xoshiro256& rng) {
    if (j < 0) throw std::invalid_argument("sample_delay: negative step index");
    struct Visitor {
        std::int64_t j;
        int d_max;
        Xoshiro256& rng;
        int operator()(const DelayModel::Zero&) const { return 0; }
        int operator()(const DelayModel::Constant& c) const { return c.d; }
        int operator()(const DelayModel::UniformRandom&) const {
            return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(d_max)));
        }
        int operator()(const DelayModel::Sequence& s) const {
            if (static_cast<std::size_t>(j) >= s.values.size())
                throw ConfigError("delay: sequence exhausted at step " + std::to_string(j));
            return s.values[static_cast<std::size_t>(j)];
        }
    };
    return std::visit(Visitor{j, model.d_max(), rng}, model.variant());
}

InputHistory::InputHistory(std::size_t n, int d_max)
    : buffer_(Mat::Zero(static_cast<Eigen::Index>(n), d_max + 1)), d_max_(d_max) {
    if (d_max < 0) throw std::invalid_argument("InputHistory: negative d_max");
}

void InputHistory::push(std::int64_t j, const Vec& theta) {
    if (j != last_ + 1) throw std::logic_error("InputHistory: inputs must be pushed in step order");
    head_ = head_ + 1 == buffer_.cols() ? 0 : head_ + 1;
    buffer_.col(head_) = theta;
    last_ = j;
}

double measure(const QuadraticMap& map, const InputHistory& history, std::int64_t j, int delay, int d_max) {
    if (j < d_max) return 0.0;
    const std::int64_t source = j - delay;
    if (delay < 0 || delay > d_max || !history.holds(source))
        throw std::logic_error("measure: delayed input θ(" + std::to_string(source) +
                               ") is outside the recorded window");
    return map.q_star() + map.excess(history.data(source));
}

}  // namespace esd
