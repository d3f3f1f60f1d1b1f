#include "esd/feasibility.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <ostream>
#include <thread>

#include "esd/errors.hpp"

namespace esd {

const char* to_string(SearchMethod m) noexcept { return m == SearchMethod::Theorem ? "theorem" : "simulation"; }

SearchMethod parse_method(const std::string& s) {
    if (s == "theorem") return SearchMethod::Theorem;
    if (s == "simulation") return SearchMethod::Simulation;
    throw ConfigError("method must be \"theorem\" or \"simulation\", got \"" + s + "\"");
}

std::vector<double> SigmaGrid::values() const {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(steps));
    for (int i = 1; i <= steps; ++i) v.push_back(min + (max - min) * i / steps);
    return v;
}

SigmaGrid SigmaGrid::around(double sigma0) { return {sigma0, 2.0 * sigma0, 30}; }

ConvergenceCriterion ConvergenceCriterion::for_variant(Variant v) {
    ConvergenceCriterion c;
    c.mode = v == Variant::Unbiased ? CriterionMode::UnbiasedExponential : CriterionMode::ClassicalPractical;
    return c;
}

void ConvergenceCriterion::validate() const {
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ConfigError("criterion.tail_fraction must be in (0, 1]");
    if (!(fail_ratio > 0.0)) throw ConfigError("criterion.fail_ratio must be positive");
    if (windows < 1) throw ConfigError("criterion.windows must be at least 1");
    if (!(radius_slack > 0.0)) throw ConfigError("criterion.radius_slack must be positive");
    if (sigma && !(*sigma > 0.0)) throw ConfigError("criterion.sigma must be positive");
}

void SearchConfig::validate() const {
    if (sigma_grid) {
        if (sigma_grid->steps < 1) throw ConfigError("search.sigma_grid.steps must be at least 1");
        if (!(sigma_grid->max > sigma_grid->min)) throw ConfigError("search.sigma_grid.max must exceed min");
    }
    for (const auto* b : {&epsilon_bracket, &sim_bracket})
        if (!(b->lo > 0.0 && b->lo < b->hi)) throw ConfigError("search: epsilon bracket needs 0 < lo < hi");
    if (!(tol > 0.0 && tol < 0.5)) throw ConfigError("search.tol must be in (0, 0.5)");
    if (max_bisections < 1) throw ConfigError("search.max_bisections must be at least 1");
    if (probe_points < 0) throw ConfigError("search.probe_points must be nonnegative");
    if (fallback_points < 2) throw ConfigError("search.fallback_points must be at least 2");
    if (sim_horizon < 1) throw ConfigError("search.sim_horizon must be positive");
    if (sim_horizon_max < sim_horizon) throw ConfigError("search.sim_horizon_max must be >= sim_horizon");
    if (!(horizon_decays >= 0.0)) throw ConfigError("search.horizon_decays must be nonnegative");
    if (sim_seeds.empty()) throw ConfigError("search.sim_seeds must not be empty");
    if (criterion) criterion->validate();
}

EsRunConfig SimTemplate::make(double epsilon, std::int64_t horizon, std::uint64_t seed) const {
    EsParams p = params;
    p.epsilon = epsilon;
    return EsRunConfig::make(map, delay, amplitudes, p, theta0, q0, horizon, seed, 1);
}

BoundInputs SimTemplate::bound_inputs(double epsilon, double sigma) const {
    BoundInputs in;
    in.n = static_cast<int>(map.dim());
    in.d_max = delay.d_max();
    in.amplitudes = amplitudes;
    in.k = params.k;
    in.lambda = params.lambda;
    in.omega_h = params.omega_h;
    in.alpha0 = params.alpha0;
    in.epsilon = epsilon;
    in.sigma = sigma;
    in.uncertainty = uncertainty;
    in.variant = params.variant;
    in.regime = regime_for(in.d_max);
    return in;
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kRefineTol = 1e-9;

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double decay_gap(const BoundInputs& in, double eps) {
    return in.variant == Variant::Unbiased ? eps * in.lambda : eps * in.k * in.uncertainty.h_min;
}

// Largest ε in [lo, hi] with pred(ε), assuming pred holds below its first failure.
// Midpoints are geometric so the returned value is exactly one that was tested.
template <class Pred>
std::optional<double> bisect_max(Pred&& pred, double lo, double hi, double tol, int max_iter) {
    if (!pred(lo)) return std::nullopt;
    if (pred(hi)) return hi;
    for (int it = 0; it < max_iter && hi / lo > 1.0 + tol; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (pred(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

}  // namespace

FeasibilityReport max_epsilon_theorem(const BoundInputs& base, const SearchConfig& search) {
    search.validate();
    const auto t0 = Clock::now();
    FeasibilityReport rep;
    rep.variant = base.variant;
    rep.method = SearchMethod::Theorem;
    rep.d_max = base.d_max;

    const SigmaGrid grid = search.sigma_grid.value_or(SigmaGrid::around(base.uncertainty.sigma0));
    const EpsilonBracket br = search.epsilon_bracket;
    auto feasible = [&](double eps, double sigma) { return feasible_for(base.at(eps, sigma), search.strict).feasible; };

    for (double sigma : grid.values()) {
        const auto e = bisect_max([&](double eps) { return feasible(eps, sigma); }, br.lo, br.hi, search.tol,
                                  search.max_bisections);
        rep.sigma_curve.emplace_back(sigma, e.value_or(0.0));
        if (e && *e > rep.epsilon_star) {
            rep.found = true;
            rep.epsilon_star = *e;
        }
    }
    // ε*(σ) is flat near its maximum, so at the search tolerance the argmax is decided by
    // bisection round-off. Re-resolve the contenders finely before choosing σ.
    const double best_coarse = rep.epsilon_star;
    rep.epsilon_star = 0.0;
    for (auto& [sigma, e] : rep.sigma_curve) {
        if (e <= 0.0 || e * (1.0 + search.tol) * (1.0 + search.tol) < best_coarse) continue;
        const double hi = std::min(br.hi, e * (1.0 + search.tol) * (1.0 + search.tol));
        e = bisect_max([&, s = sigma](double eps) { return feasible(eps, s); }, e, hi, kRefineTol, 200).value_or(e);
        if (e > rep.epsilon_star) {
            rep.epsilon_star = e;
            rep.sigma = sigma;
        }
    }

    if (!rep.found) {
        // Name the condition that comes closest at the smallest ε and largest σ.
        const FeasibilityCheck chk = feasible_for(base.at(br.lo, grid.max), search.strict);
        rep.margins = chk.margins;
        rep.chain = chk.chain;
        const Margin* m = chk.tightest();
        rep.note = "infeasible in bracket";
        if (m) rep.note += "; smallest margin: " + m->name;
        else if (!chk.reason.empty()) rep.note += "; " + chk.reason;
        rep.seconds = elapsed(t0);
        return rep;
    }

    const double sigma = rep.sigma;
    rep.monotone_verified = true;
    for (int i = 1; i <= search.probe_points; ++i) {
        const double probe = rep.epsilon_star * (1.0 + i * search.tol);
        if (probe <= br.hi && feasible(probe, sigma)) rep.monotone_verified = false;
    }
    if (!rep.monotone_verified) {
        // Feasibility is not monotone near the maximum: scan a log grid and refine the
        // largest feasible grid point against its infeasible neighbour.
        rep.used_fallback = true;
        const int pts = search.fallback_points;
        const double step = std::log(br.hi / br.lo) / (pts - 1);
        int best = -1;
        for (int i = 0; i < pts; ++i)
            if (feasible(br.lo * std::exp(step * i), sigma)) best = i;
        const double g = br.lo * std::exp(step * best);
        if (best == pts - 1) {
            rep.epsilon_star = br.hi;
        } else {
            const double next = br.lo * std::exp(step * (best + 1));
            rep.epsilon_star = bisect_max([&](double eps) { return feasible(eps, sigma); }, g, next, search.tol,
                                          search.max_bisections)
                                   .value_or(g);
        }
        rep.note = "feasibility not monotone in epsilon near the maximum; used log-grid scan";
    }

    const FeasibilityCheck chk = feasible_for(base.at(rep.epsilon_star, sigma), search.strict);
    rep.margins = chk.margins;
    rep.chain = chk.chain;
    rep.decay_gap = decay_gap(base, rep.epsilon_star);
    rep.decay_rate = 1.0 - rep.decay_gap;
    rep.seconds = elapsed(t0);
    return rep;
}

std::int64_t simulation_horizon(const SimTemplate& tpl, double epsilon, const SearchConfig& search) {
    std::int64_t horizon = search.sim_horizon;
    if (search.horizon_decays > 0.0) {
        const double rate = tpl.params.variant == Variant::Unbiased ? tpl.params.lambda
                                                                    : tpl.params.k * tpl.uncertainty.h_min;
        if (rate > 0.0) {
            const double want = std::ceil(search.horizon_decays / (epsilon * rate));
            const double capped = std::min(want, static_cast<double>(search.sim_horizon_max));
            horizon = std::max(horizon, static_cast<std::int64_t>(capped));
        }
    }
    return horizon + tpl.delay.d_max();
}

namespace {

// Streams a run through the criterion, keeping per-chunk maxima of the error for
// the tail and per-window maxima for the envelope.
class CriterionMonitor {
public:
    static constexpr std::int64_t kChunks = 1000;

    CriterionMonitor(const ConvergenceCriterion& c, int d_max, std::int64_t horizon, double sigma)
        : c_(c), d_max_(d_max), sigma_(sigma) {
        const std::int64_t post = std::max<std::int64_t>(horizon - d_max, 1);
        chunk_len_ = (post + kChunks - 1) / kChunks;
        chunk_max_.assign(static_cast<std::size_t>((post + chunk_len_ - 1) / chunk_len_), 0.0);
        window_len_ = std::max<std::int64_t>((post + c.windows - 1) / c.windows, 1);
    }

    bool operator()(const StepView& v) {
        if (v.j < d_max_) return true;
        const std::int64_t t = v.j - d_max_;
        if (t == 0) reference_ = v.err;
        max_err_ = std::max(max_err_, v.err);
        double& chunk = chunk_max_[static_cast<std::size_t>(t / chunk_len_)];
        chunk = std::max(chunk, v.err);

        if (c_.mode == CriterionMode::ClassicalPractical) {
            if (!(v.err < sigma_)) {
                fail_ = "error " + format_double(v.err) + " reached sigma at step " + std::to_string(v.j);
                return false;
            }
            return true;
        }
        const std::int64_t w = t / window_len_;
        if (w != window_) {
            if (!close_window()) {
                fail_ = "window envelope increased at step " + std::to_string(v.j);
                return false;
            }
            window_ = w;
            window_max_ = 0.0;
        }
        window_max_ = std::max(window_max_, v.err);
        return true;
    }

    SeedVerdict finish(const RunResult& run, double radius) {
        SeedVerdict sv;
        sv.status = run.status;
        sv.steps = run.steps;
        sv.reference_err = reference_;
        sv.max_err = max_err_;
        if (!fail_.empty()) {
            sv.reason = fail_;
            return sv;
        }
        if (run.status == RunStatus::Diverged) {
            sv.reason = run.message;
            return sv;
        }
        const std::int64_t post = run.steps - d_max_;
        if (post <= 0) {
            sv.reason = "run ended before D_M";
            return sv;
        }
        const auto tail_from =
            static_cast<std::int64_t>(std::floor(static_cast<double>(post) * (1.0 - c_.tail_fraction)));
        const std::int64_t last_chunk = (post - 1) / chunk_len_;
        for (std::int64_t k = tail_from / chunk_len_; k <= last_chunk; ++k)
            sv.tail_max = std::max(sv.tail_max, chunk_max_[static_cast<std::size_t>(k)]);

        if (c_.mode == CriterionMode::UnbiasedExponential) {
            if (window_ >= 0 && !close_window()) {
                sv.reason = "window envelope increased in the final window";
                return sv;
            }
            sv.threshold = c_.fail_ratio * reference_;
        } else {
            sv.threshold = c_.radius_slack * radius;
        }
        sv.pass = sv.tail_max < sv.threshold;
        if (!sv.pass)
            sv.reason = "no convergence within horizon: tail max " + format_double(sv.tail_max) + " >= " +
                        format_double(sv.threshold);
        return sv;
    }

private:
    bool close_window() {
        if (window_ < 0) return true;
        const bool ok = window_max_ <= prev_window_max_;
        prev_window_max_ = window_max_;
        return ok;
    }

    const ConvergenceCriterion& c_;
    int d_max_;
    double sigma_;
    std::int64_t chunk_len_ = 1;
    std::vector<double> chunk_max_;
    std::int64_t window_len_ = 1;
    std::int64_t window_ = -1;
    double window_max_ = 0.0;
    double prev_window_max_ = std::numeric_limits<double>::infinity();
    double reference_ = 0.0;
    double max_err_ = 0.0;
    std::string fail_;
};

SeedVerdict run_seed(const SimTemplate& tpl, double eps, std::int64_t horizon, std::uint64_t seed,
                     const ConvergenceCriterion& crit, double sigma, double radius) {
    EsRunConfig cfg = tpl.make(eps, horizon, seed);
    cfg.stop_at_resolution = true;
    cfg.divergence_limit = 1e6;
    CriterionMonitor mon(crit, cfg.d_max(), horizon, sigma);
    const RunResult res = run_with(cfg, mon);
    SeedVerdict sv = mon.finish(res, radius);
    sv.seed = seed;
    return sv;
}

}  // namespace

std::string SimVerdict::reason() const {
    for (const SeedVerdict& s : seeds)
        if (!s.pass) return "seed " + std::to_string(s.seed) + ": " + s.reason;
    return {};
}

SimVerdict evaluate_simulation(const SimTemplate& tpl, double epsilon, const SearchConfig& search,
                               const ConvergenceCriterion& criterion, double sigma,
                               std::optional<std::int64_t> horizon) {
    SimVerdict v;
    v.epsilon = epsilon;
    v.horizon = horizon.value_or(simulation_horizon(tpl, epsilon, search));

    double radius = 0.0;
    if (criterion.mode == CriterionMode::ClassicalPractical) {
        const BoundInputs in = tpl.bound_inputs(epsilon, sigma);
        try {
            radius = ultimate_bound_radius(in, chain_theorem2(in));
        } catch (const ChainUndefined&) {
            radius = 0.0;
        }
    }

    // Deterministic delay models give the same run for every seed.
    std::vector<std::uint64_t> seeds = search.sim_seeds;
    if (!tpl.delay.is_stochastic()) seeds.resize(1);

    unsigned threads = search.threads ? search.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(seeds.size()));
    v.seeds.resize(seeds.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i)
            v.seeds[i] = run_seed(tpl, epsilon, v.horizon, seeds[i], criterion, sigma, radius);
    } else {
        std::vector<std::future<SeedVerdict>> futs;
        for (std::size_t i = 0; i < seeds.size(); ++i)
            futs.push_back(std::async(std::launch::async, run_seed, std::cref(tpl), epsilon, v.horizon, seeds[i],
                                      std::cref(criterion), sigma, radius));
        for (std::size_t i = 0; i < seeds.size(); ++i) v.seeds[i] = futs[i].get();
    }
    v.pass = std::all_of(v.seeds.begin(), v.seeds.end(), [](const SeedVerdict& s) { return s.pass; });
    return v;
}

FeasibilityReport max_epsilon_simulation(const SimTemplate& tpl, const SearchConfig& search) {
    search.validate();
    const auto t0 = Clock::now();
    FeasibilityReport rep;
    rep.variant = tpl.params.variant;
    rep.method = SearchMethod::Simulation;
    rep.d_max = tpl.delay.d_max();

    const ConvergenceCriterion crit = search.criterion.value_or(ConvergenceCriterion::for_variant(rep.variant));
    crit.validate();
    double sigma = 2.0 * tpl.uncertainty.sigma0;
    if (crit.sigma) {
        sigma = *crit.sigma;
    } else {
        const FeasibilityReport th = max_epsilon_theorem(tpl.bound_inputs(1e-3, sigma), search);
        if (th.found) sigma = th.sigma;
    }
    rep.sigma = sigma;

    auto pass = [&](double eps) {
        rep.evaluations.push_back(evaluate_simulation(tpl, eps, search, crit, sigma));
        return rep.evaluations.back().pass;
    };

    const EpsilonBracket br = search.sim_bracket;
    const double step = std::sqrt(10.0);
    std::optional<double> good;
    std::optional<double> bad;
    for (double e = br.hi;; e = std::max(e / step, br.lo)) {
        if (pass(e)) {
            good = e;
            break;
        }
        bad = e;
        if (e <= br.lo) break;
    }
    if (!good) {
        rep.note = "bracket too high: criterion fails down to " + format_double(br.lo) + " (" +
                   rep.evaluations.back().reason() + ")";
        rep.seconds = elapsed(t0);
        return rep;
    }
    rep.found = true;
    if (!bad) {
        rep.epsilon_star = *good;
        rep.note = "criterion holds at the top of the bracket";
    } else {
        double lo = *good, hi = *bad;
        for (int it = 0; it < search.max_bisections && hi / lo > 1.0 + search.tol; ++it) {
            const double mid = std::sqrt(lo * hi);
            if (pass(mid))
                lo = mid;
            else
                hi = mid;
        }
        rep.epsilon_star = lo;
        rep.monotone_verified = true;
        for (int i = 1; i <= search.probe_points; ++i) {
            const double probe = lo * (1.0 + i * search.tol);
            if (probe <= br.hi && pass(probe)) rep.monotone_verified = false;
        }
        if (!rep.monotone_verified) rep.note = "criterion also passes above the reported maximum (not monotone)";
    }
    const BoundInputs in = tpl.bound_inputs(rep.epsilon_star, sigma);
    rep.decay_gap = decay_gap(in, rep.epsilon_star);
    rep.decay_rate = 1.0 - rep.decay_gap;
    rep.seconds = elapsed(t0);
    return rep;
}

ExampleSetup ExampleSetup::standard() {
    Vec theta_star(3);
    theta_star << 2.0, 4.0, 1.0;
    Mat h(3, 3);
    h << 100.0, 30.0, 5.0, 30.0, 20.0, 5.0, 5.0, 5.0, 50.0;
    UncertaintyBounds unc{9.5, 111.0, 1.0, 0.0, 1.0};
    EsParams p;
    p.k = 0.005;
    p.lambda = 0.005;
    p.omega_h = 0.015;
    p.alpha0 = 1.0;
    Vec theta0(3);
    theta0 << 1.3, 3.5, 0.5;
    return {QuadraticMap(theta_star, 0.0, h), unc, Vec::Constant(3, 0.1), p, theta0};
}

SimTemplate ExampleSetup::sim_template(Variant variant, int d_max, std::uint64_t seed) const {
    EsParams p = params;
    p.variant = variant;
    DelayModel delay = d_max == 0 ? DelayModel::zero() : DelayModel::uniform(d_max, seed);
    return {map, std::move(delay), amplitudes, p, theta0, uncertainty.q0, uncertainty};
}

BoundInputs ExampleSetup::bound_inputs(Variant variant, int d_max) const {
    return sim_template(variant, d_max).bound_inputs(1e-6, 1.5);
}

TableResult table_reproduce(Variant variant, const TableOptions& options) {
    const ExampleSetup ex = ExampleSetup::standard();
    TableResult t;
    t.variant = variant;
    for (int d : options.delays) {
        t.theorem_rows.push_back({max_epsilon_theorem(ex.bound_inputs(variant, d), options.search), false});
    }
    for (int d : options.delays) {
        TableRow row;
        row.report.variant = variant;
        row.report.method = SearchMethod::Simulation;
        row.report.d_max = d;
        const bool skip = !options.run_simulation ||
                          (options.skip_simulation_from > 0 && d >= options.skip_simulation_from);
        if (skip) {
            row.skipped = true;
            row.report.note = "skipped";
        } else {
            row.report = max_epsilon_simulation(ex.sim_template(variant, d), options.search);
        }
        t.simulation_rows.push_back(std::move(row));
    }
    return t;
}

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void render_row(std::ostream& os, const TableRow& row, bool show_sigma) {
    const FeasibilityReport& r = row.report;
    char line[160];
    std::string eps = "-", rate = "-", sigma = "-";
    if (row.skipped) {
        eps = "skipped";
    } else if (!r.found) {
        eps = "none";
    } else {
        eps = sci(r.epsilon_star);
        rate = "1 - " + sci(r.decay_gap);
        if (show_sigma) {
            char s[16];
            std::snprintf(s, sizeof s, "%.3g", r.sigma);
            sigma = s;
        }
    }
    std::snprintf(line, sizeof line, "%-11s %5d %7s %12s %18s\n", to_string(r.method), r.d_max, sigma.c_str(),
                  eps.c_str(), rate.c_str());
    os << line;
}

}  // namespace

void render_table(std::ostream& os, const TableResult& table) {
    os << "Maximum epsilon* for " << to_string(table.variant) << " ES\n";
    char head[160];
    std::snprintf(head, sizeof head, "%-11s %5s %7s %12s %18s\n", "method", "D_M", "sigma", "epsilon*", "decay rate");
    os << head;
    for (const TableRow& r : table.theorem_rows) render_row(os, r, true);
    for (const TableRow& r : table.simulation_rows) render_row(os, r, false);
}

void write_report_csv_header(std::ostream& os) { os << "variant,D_M,sigma,epsilon_star,decay_rate,method\n"; }

void write_report_csv_row(std::ostream& os, const FeasibilityReport& r) {
    os << to_string(r.variant) << ',' << r.d_max << ',' << format_double(r.sigma) << ','
       << format_double(r.found ? r.epsilon_star : 0.0) << ',' << format_double(r.found ? r.decay_rate : 1.0) << ','
       << to_string(r.method) << '\n';
}

void write_table_csv(std::ostream& os, const TableResult& table) {
    write_report_csv_header(os);
    for (const TableRow& r : table.theorem_rows) write_report_csv_row(os, r.report);
    for (const TableRow& r : table.simulation_rows)
        if (!r.skipped) write_report_csv_row(os, r.report);
}

}  // namespace esd
