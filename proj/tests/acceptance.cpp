// One pass/fail line per acceptance criterion. Not registered with ctest: the
// simulation rows take minutes and are allowed to fail on their own merits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esd/bounds.hpp"
#include "esd/dither.hpp"
#include "esd/estimator.hpp"
#include "esd/feasibility.hpp"
#include "esd/report.hpp"

using namespace esd;

namespace {

// Tolerances, fixed here rather than taken from flags.
constexpr double kTheoremFactor = 2.0;
constexpr double kSigmaWindow = 0.1 + 1e-9;
constexpr double kSimulationFactor = 10.0;
constexpr double kIdentityTol = 1e-9;
constexpr double kOracleTol = 1e-10;
constexpr double kUnbiasedContrast = 100.0;
constexpr double kRadiusSlack = 2.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Line {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Line> g_lines;

void report(int id, bool pass, const std::string& detail) {
    g_lines.push_back({id, pass, detail});
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1, 2 ---------------------------------------------------------------------------

void theorem_rows(int id, Variant v, const std::vector<double>& eps_ref, const std::vector<double>& sigma_ref,
                  double budget) {
    const auto t0 = Clock::now();
    const ExampleSetup ex = ExampleSetup::standard();
    const std::vector<int> delays{0, 5, 50};
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const FeasibilityReport r = max_epsilon_theorem(ex.bound_inputs(v, delays[i]), SearchConfig{});
        const bool row = r.found && r.epsilon_star <= kTheoremFactor * eps_ref[i] &&
                         r.epsilon_star >= eps_ref[i] / kTheoremFactor &&
                         std::abs(r.sigma - sigma_ref[i]) <= kSigmaWindow;
        ok = ok && row;
        detail += fmt("D%d eps* %.3g (ref %.2g) sigma %.3g (ref %.1f)%s; ", delays[i], r.epsilon_star, eps_ref[i],
                      r.sigma, sigma_ref[i], row ? "" : " MISS");
    }
    const double t = seconds_since(t0);
    report(id, ok && t < budget, detail + fmt("%.1f s", t));
}

// 3 ------------------------------------------------------------------------------

void simulation_rows(bool fast) {
    const auto t0 = Clock::now();
    struct Ref {
        Variant v;
        std::vector<double> eps;
    };
    bool ok = true;
    std::string detail;
    for (const Ref& ref : {Ref{Variant::Unbiased, {0.7e-3, 0.3e-4, 0.3e-5}}, Ref{Variant::Classical, {0.2e-2, 0.2e-3, 0.8e-5}}}) {
        TableOptions opt;
        if (fast) opt.skip_simulation_from = 50;
        const TableResult t = table_reproduce(ref.v, opt);
        for (std::size_t i = 0; i < t.simulation_rows.size(); ++i) {
            const TableRow& row = t.simulation_rows[i];
            if (row.skipped) {
                detail += fmt("%s D%d skipped; ", to_string(ref.v), row.report.d_max);
                continue;
            }
            const double e = row.report.epsilon_star;
            const bool pass = row.report.found && e <= kSimulationFactor * ref.eps[i] && e >= ref.eps[i] / kSimulationFactor;
            ok = ok && pass;
            detail += fmt("%s D%d eps* %.3g (ref %.2g, x%.3g)%s; ", to_string(ref.v), row.report.d_max, e, ref.eps[i],
                          e / ref.eps[i], pass ? "" : " MISS");
        }
    }
    const double t = seconds_since(t0);
    report(3, ok && t < 1800.0, detail + fmt("%.1f s", t));
}

// 4 ------------------------------------------------------------------------------

void identities() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (const IdentityCase& c : identity_suite())
        worst = std::max({worst, c.residual_demod, c.residual_identity, c.residual_quadratic});
    const double t = seconds_since(t0);
    report(4, worst <= kIdentityTol && t < 5.0, fmt("max residual %.3g over 4 cases, %.2f s", worst, t));
}

// 5 ------------------------------------------------------------------------------

struct DominationCase {
    Mat hessian;
    Vec amplitudes;
    int d_max;
    double eps;
    double k;
};

// Smallest bar/seen ratio over l; > 1 means strict domination.
double domination_ratio(const DominationCase& c) {
    const int n = static_cast<int>(c.hessian.rows());
    BoundInputs in;
    in.n = n;
    in.d_max = c.d_max;
    in.amplitudes = c.amplitudes;
    in.k = c.k;
    in.epsilon = c.eps;
    in.sigma = 2.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(c.hessian);
    in.uncertainty = {es.eigenvalues()(0), es.eigenvalues()(n - 1), 1.0, 0.0, 1.0};
    in.regime = regime_for(c.d_max);
    const RhoBars bar = rho_bars(in);
    const double scale = c.d_max == 0 ? c.eps : std::sqrt(c.eps);
    const auto seen = rho_period_max(DitherConfig(c.amplitudes, c.eps, c.d_max), c.k, c.hessian);
    double ratio = INFINITY;
    for (std::size_t l = 0; l < 4; ++l) ratio = std::min(ratio, bar[l] * scale / seen[l]);
    return ratio;
}

void domination() {
    const auto t0 = Clock::now();
    Mat h3(3, 3);
    h3 << 100, 30, 5, 30, 20, 5, 5, 5, 50;
    Mat h2(2, 2);
    h2 << 3.0, 1.0, 1.0, 2.0;
    Mat h1(1, 1);
    h1 << 2.0;
    Vec a2(2);
    a2 << 0.1, 0.3;
    Vec a3(3);
    a3 << 0.2, 0.1, 0.05;
    const std::vector<DominationCase> delayed{{h3, Vec::Constant(3, 0.1), 5, 1e-4, 0.005},
                                              {h3, a3, 50, 1e-4, 0.005},
                                              {h2, a2, 3, 4e-4, 0.02},
                                              {h1, Vec::Constant(1, 0.1), 1, 1e-2, 0.1}};
    const std::vector<DominationCase> free{{h3, Vec::Constant(3, 0.1), 0, 1e-4, 0.005},
                                           {h3, a3, 0, 1e-2, 0.005},
                                           {h2, a2, 0, 1e-3, 0.02}};
    double worst_delayed = INFINITY, worst_free = INFINITY;
    for (const auto& c : delayed) worst_delayed = std::min(worst_delayed, domination_ratio(c));
    for (const auto& c : free) worst_free = std::min(worst_free, domination_ratio(c));
    const double t = seconds_since(t0);
    report(5, worst_delayed > 1.0 && worst_free > 1.0 && t < 30.0,
           fmt("min bound/observed ratio: delayed %.4g over %zu sets, delay-free %.4g over %zu sets, %.2f s",
               worst_delayed, delayed.size(), worst_free, free.size(), t));
}

// 6 ------------------------------------------------------------------------------

struct EnvelopeResult {
    double theta_ratio = 0.0;  // max |θ̂−θ*| / (σ λ̄ʲ)
    double eta_ratio = 0.0;    // max |η−Q*| / (σ_η λ̄²ʲ)
};

EnvelopeResult envelope(const SimTemplate& tpl, double eps, double sigma, double sigma_eta, std::int64_t horizon,
                        std::uint64_t seed) {
    const EsRunConfig cfg = tpl.make(eps, horizon, seed);
    const double log_lam = std::log1p(-eps * cfg.params.lambda);
    const double q_star = cfg.map.q_star();
    EnvelopeResult r;
    run_with(cfg, [&](const StepView& v) {
        if (v.j < cfg.d_max()) return;
        const double decay = std::exp(log_lam * static_cast<double>(v.j));
        r.theta_ratio = std::max(r.theta_ratio, v.err / (sigma * decay));
        r.eta_ratio = std::max(r.eta_ratio, std::abs(v.eta - q_star) / (sigma_eta * decay * decay));
    });
    return r;
}

void envelope_property() {
    const ExampleSetup ex = ExampleSetup::standard();
    const FeasibilityReport cert = max_epsilon_theorem(ex.bound_inputs(Variant::Unbiased, 5), SearchConfig{});
    if (!cert.found) {
        report(6, false, "no certified epsilon");
        return;
    }
    struct Realization {
        std::string name;
        DelayModel delay;
    };
    const std::vector<Realization> realizations{{"zero", DelayModel::constant(0, 5)},
                                                {"constant 5", DelayModel::constant(5)},
                                                {"uniform seed 1", DelayModel::uniform(5, 1)},
                                                {"uniform seed 2", DelayModel::uniform(5, 2)},
                                                {"uniform seed 3", DelayModel::uniform(5, 3)}};
    auto check_at = [&](double eps, std::int64_t horizon, double& worst_theta, double& worst_eta) {
        const BoundInputs in = ex.bound_inputs(Variant::Unbiased, 5).at(eps, cert.sigma);
        const double sigma_eta = filter_bounds_theorem1(in).sigma_eta;
        worst_theta = worst_eta = 0.0;
        for (const Realization& rz : realizations) {
            SimTemplate tpl = ex.sim_template(Variant::Unbiased, 5);
            tpl.delay = rz.delay;
            const EnvelopeResult e = envelope(tpl, eps, cert.sigma, sigma_eta, horizon, rz.delay.seed());
            worst_theta = std::max(worst_theta, e.theta_ratio);
            worst_eta = std::max(worst_eta, e.eta_ratio);
        }
    };
    double ct = 0.0, ce = 0.0, st = 0.0, se = 0.0;
    const std::int64_t horizon = 2000000;
    check_at(cert.epsilon_star, horizon, ct, ce);
    const double sim_eps = 0.3e-4;
    check_at(sim_eps, horizon, st, se);
    const bool certified_ok = ct < 1.0 && ce < 1.0;
    const bool beyond_ok = st < 1.0 && se < 1.0;
    report(6, certified_ok,
           fmt("certified eps* %.4g sigma %.3g over 5 delay realizations x %lld steps: max |err|/envelope %.4g, "
               "max |eta-Q*|/envelope %.4g; at eps %.2g (beyond the certificate, non-fatal): %.4g, %.4g %s",
               cert.epsilon_star, cert.sigma, static_cast<long long>(horizon), ct, ce, sim_eps, st, se,
               beyond_ok ? "holds" : "violated"));
}

// 7 ------------------------------------------------------------------------------

void practical_stability() {
    const auto t0 = Clock::now();
    const ExampleSetup ex = ExampleSetup::standard();
    const std::int64_t horizon = 2000000;
    const std::int64_t tail_from = horizon - horizon / 10;

    const FeasibilityReport cert = max_epsilon_theorem(ex.bound_inputs(Variant::Classical, 5), SearchConfig{});
    const double sigma = cert.found ? cert.sigma : 1.6;
    const double eps_c = 0.2e-3;
    const BoundInputs in = ex.bound_inputs(Variant::Classical, 5).at(eps_c, sigma);
    const double radius = ultimate_bound_radius(in, chain_theorem2(in));

    // Tail = last 10% of the run. The classical run uses the fixed 2e6 horizon; the
    // unbiased run decays at ελ, 9.5x slower than εkH_m, so it gets the horizon rule of
    // the simulation search (gain down by e^-5). Its 2e6-step tail is reported too.
    auto tail_and_max = [&](Variant v, double eps, std::int64_t n) {
        const EsRunConfig cfg = ex.sim_template(v, 5).make(eps, n, 1);
        const std::int64_t from = n - n / 10;
        double worst = 0.0, tail = 0.0, tail_short = 0.0;
        run_with(cfg, [&](const StepView& s) {
            if (s.j >= cfg.d_max()) worst = std::max(worst, s.err);
            if (s.j >= from) tail = std::max(tail, s.err);
            if (s.j >= tail_from && s.j < horizon) tail_short = std::max(tail_short, s.err);
        });
        return std::tuple{worst, tail, tail_short};
    };
    const auto [worst_c, tail_c, tail_c_short] = tail_and_max(Variant::Classical, eps_c, horizon);
    const double eps_u = 0.3e-4;
    const std::int64_t horizon_u = simulation_horizon(ex.sim_template(Variant::Unbiased, 5), eps_u, SearchConfig{});
    const auto [worst_u, tail_u, tail_u_short] = tail_and_max(Variant::Unbiased, eps_u, horizon_u);
    (void)worst_u;
    (void)tail_c_short;
    const bool inside = worst_c < sigma && tail_c < kRadiusSlack * radius;
    const bool contrast = tail_u * kUnbiasedContrast <= tail_c;
    const double t = seconds_since(t0);
    report(7, inside && contrast && t < 300.0,
           fmt("classical eps 2e-4: max err %.4g < sigma %.3g %s, tail %.4g vs 2x radius %.4g %s; unbiased eps 3e-5 "
               "over %lld steps: tail %.4g, ratio %.3g (need >= %.0f) %s [tail over 2e6 steps %.4g]; %.1f s",
               worst_c, sigma, worst_c < sigma ? "ok" : "NO", tail_c, kRadiusSlack * radius,
               tail_c < kRadiusSlack * radius ? "ok" : "NO", static_cast<long long>(horizon_u), tail_u,
               tail_c / tail_u, kUnbiasedContrast, contrast ? "ok" : "NO", tail_u_short, t));
}

// 8 ------------------------------------------------------------------------------

void oracle() {
    const auto t0 = Clock::now();
    const ExampleSetup ex = ExampleSetup::standard();
    double worst = 0.0;
    for (Variant v : {Variant::Unbiased, Variant::Classical}) {
        EsRunConfig cfg = ex.sim_template(v, 5).make(v == Variant::Unbiased ? 0.3e-4 : 0.2e-3, 100000, 1);
        cfg.map = QuadraticMap(cfg.map.theta_star(), 0.75, cfg.map.hessian());
        cfg.q0 = 0.5;
        const Trajectory a = run(cfg), e = run_error_system(cfg);
        const double q = cfg.map.q_star();
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            worst = std::max(worst, (a.records[i].theta_hat - cfg.map.theta_star() - e.records[i].theta_hat)
                                        .cwiseAbs()
                                        .maxCoeff());
            worst = std::max(worst, std::abs(a.records[i].eta - q - e.records[i].eta));
            worst = std::max(worst, std::abs(a.records[i].y - q - e.records[i].y));
        }
    }
    const double t = seconds_since(t0);
    report(8, worst <= kOracleTol && t < 10.0, fmt("sup-norm difference %.3g over 1e5 steps, both variants, %.2f s", worst, t));
}

// 9 ------------------------------------------------------------------------------

void determinism() {
    const ExampleSetup ex = ExampleSetup::standard();
    auto trajectory_csv = [&] {
        EsRunConfig cfg = ex.sim_template(Variant::Unbiased, 5, 3).make(0.3e-4, 200000, 3);
        cfg.decimation = 100;
        std::ostringstream os;
        write_trajectory_csv(os, run(cfg));
        return os.str();
    };
    auto table_csv = [&] {
        TableOptions opt;
        opt.run_simulation = false;
        std::ostringstream os;
        write_table_csv(os, table_reproduce(Variant::Classical, opt));
        return os.str();
    };
    auto verdict_csv = [&] {
        SearchConfig s;
        const SimVerdict v = evaluate_simulation(ex.sim_template(Variant::Classical, 5), 0.2e-3, s,
                                                 ConvergenceCriterion::for_variant(Variant::Classical), 1.6,
                                                 std::int64_t{200000});
        std::ostringstream os;
        for (const SeedVerdict& sv : v.seeds)
            os << sv.seed << ',' << format_double(sv.max_err) << ',' << format_double(sv.tail_max) << '\n';
        return os.str();
    };
    const bool a = trajectory_csv() == trajectory_csv();
    const bool b = table_csv() == table_csv();
    const bool c = verdict_csv() == verdict_csv();
    report(9, a && b && c,
           fmt("trajectory %s, theorem table %s, seeded simulation verdicts %s", a ? "identical" : "DIFFER",
               b ? "identical" : "DIFFER", c ? "identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    bool fast = false;
    std::vector<int> only;
    app.add_flag("--fast", fast, "skip the D_M = 50 simulation rows");
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<void()>> checks{
        [] { theorem_rows(1, Variant::Unbiased, {0.43e-5, 0.36e-11, 0.3e-13}, {1.6, 1.7, 1.7}, 60.0); },
        [] { theorem_rows(2, Variant::Classical, {0.19e-4, 0.66e-10, 0.63e-12}, {1.6, 1.6, 1.6}, 60.0); },
        [fast] { simulation_rows(fast); },
        identities,
        domination,
        envelope_property,
        practical_stability,
        oracle,
        determinism,
    };
    for (std::size_t i = 0; i < checks.size(); ++i)
        if (only.empty() || std::find(only.begin(), only.end(), static_cast<int>(i + 1)) != only.end()) checks[i]();

    const auto failed = std::count_if(g_lines.begin(), g_lines.end(), [](const Line& l) { return !l.pass; });
    std::printf("%zu checked, %zd failed\n", g_lines.size(), static_cast<std::ptrdiff_t>(failed));
    return failed == 0 ? 0 : 1;
}
