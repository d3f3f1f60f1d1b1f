#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "esd/bounds.hpp"
#include "esd/config.hpp"
#include "esd/errors.hpp"
#include "esd/estimator.hpp"
#include "esd/feasibility.hpp"
#include "esd/report.hpp"

namespace fs = std::filesystem;
using namespace esd;

namespace {

enum Exit { kOk = 0, kConfig = 2, kRuntime = 3, kUndefined = 4 };

struct Global {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed_override;
    bool plot = false;
    bool quiet = false;
    bool fast = false;
    std::string method = "theorem";
    std::string variant;
    std::string target;
    std::optional<double> sigma;
};

std::ofstream open_out(const Global& g, const std::string& name) {
    fs::create_directories(g.out);
    const fs::path p = fs::path(g.out) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

RunSpec load(const Global& g) {
    if (g.config.empty()) throw ConfigError("--config is required for this command");
    RunSpec spec = load_run_spec(g.config);
    if (g.seed_override) spec.override_seed(*g.seed_override);
    return spec;
}

int cmd_simulate(const Global& g) {
    const RunSpec spec = load(g);
    const EsRunConfig cfg = spec.run_config();
    const Trajectory traj = run(cfg);
    {
        std::ofstream f = open_out(g, "trajectory.csv");
        write_trajectory_csv(f, traj);
    }
    if (g.plot) {
        std::ofstream f = open_out(g, "plot.svg");
        PlotOptions opt;
        opt.title = std::string(to_string(spec.params.variant)) + " ES, D_M = " + std::to_string(cfg.d_max()) +
                    ", eps = " + format_double(spec.epsilon);
        write_svg_plot(f, {error_series(traj, "D_M = " + std::to_string(cfg.d_max()))}, opt);
    }
    if (!g.quiet) {
        std::printf("%s: %lld steps, final err %.6g, max err %.6g\n", to_string(traj.result.status),
                    static_cast<long long>(traj.result.steps), traj.tail.empty() ? 0.0 : traj.tail.back().err,
                    traj.max_err);
    }
    if (traj.result.status == RunStatus::PrecisionFloor || traj.result.status == RunStatus::Diverged) {
        std::fprintf(stderr, "runtime: %s\n", traj.result.message.c_str());
        return kRuntime;
    }
    return kOk;
}

int cmd_bounds(const Global& g) {
    const RunSpec spec = load(g);
    const double sigma = g.sigma.value_or(1.5 * spec.uncertainty.sigma0);
    const BoundInputs in = spec.bound_inputs(sigma);
    const BoundChain chain = chain_for(in);  // ChainUndefined maps to exit 4
    const FeasibilityCheck chk = feasible_for(in);
    if (!g.quiet) {
        render_chain(std::cout, in, chain);
        std::cout << (chk.feasible ? "feasible" : "infeasible");
        if (!chk.reason.empty()) std::cout << " (" << chk.reason << ')';
        std::cout << '\n';
        for (const Margin& m : chk.margins) std::cout << "  margin " << m.name << ' ' << format_double(m.value) << '\n';
        if (in.variant == Variant::Classical)
            std::cout << "  radius " << format_double(ultimate_bound_radius(in, chain)) << '\n';
    }
    std::ofstream f = open_out(g, "bounds.csv");
    write_chain_csv(f, in, chain);
    return kOk;
}

int cmd_search(const Global& g) {
    RunSpec spec = load(g);
    if (!g.variant.empty()) spec.params.variant = parse_variant(g.variant);
    const SearchMethod method = parse_method(g.method);
    FeasibilityReport rep;
    if (method == SearchMethod::Theorem)
        rep = max_epsilon_theorem(spec.bound_inputs(1.5 * spec.uncertainty.sigma0), spec.search);
    else
        rep = max_epsilon_simulation(spec.sim_template(), spec.search);
    if (!g.quiet) render_report(std::cout, rep);
    std::ofstream f = open_out(g, "search.csv");
    write_report_csv_header(f);
    write_report_csv_row(f, rep);
    return rep.found ? kOk : kRuntime;
}

int reproduce_table(const Global& g, Variant v, const std::string& name) {
    TableOptions opt;
    if (g.fast) opt.skip_simulation_from = 50;
    if (g.seed_override) opt.search.sim_seeds = {*g.seed_override};
    const TableResult t = table_reproduce(v, opt);
    if (!g.quiet) render_table(std::cout, t);
    std::ofstream f = open_out(g, name + ".csv");
    write_table_csv(f, t);
    return kOk;
}

int reproduce_figure(const Global& g, Variant v, const std::string& name, double eps0, double eps5) {
    const ExampleSetup ex = ExampleSetup::standard();
    std::vector<PlotSeries> series;
    for (auto [d, eps] : {std::pair{0, eps0}, std::pair{5, eps5}}) {
        EsRunConfig cfg = ex.sim_template(v, d, g.seed_override.value_or(1)).make(eps, 2000000, g.seed_override.value_or(1));
        cfg.decimation = 1000;
        const Trajectory traj = run(cfg);
        std::ofstream f = open_out(g, name + "_d" + std::to_string(d) + ".csv");
        write_trajectory_csv(f, traj);
        series.push_back(error_series(traj, "D_M = " + std::to_string(d) + ", eps = " + format_double(eps)));
        if (!g.quiet)
            std::printf("D_M=%d eps=%g: %s, final err %.6g\n", d, eps, to_string(traj.result.status),
                        traj.tail.empty() ? 0.0 : traj.tail.back().err);
    }
    PlotOptions opt;
    opt.title = std::string(to_string(v)) + " ES";
    std::ofstream f = open_out(g, name + ".svg");
    write_svg_plot(f, series, opt);
    return kOk;
}

int reproduce_identities(const Global& g) {
    bool ok = true;
    std::ofstream f = open_out(g, "identities.csv");
    f << "n,D_M,epsilon,T,residual_demod,residual_identity,residual_quadratic\n";
    for (const IdentityCase& c : identity_suite()) {
        const bool pass = c.residual_demod <= 1e-9 && c.residual_identity <= 1e-9 && c.residual_quadratic <= 1e-9;
        ok = ok && pass;
        f << c.n << ',' << c.d_max << ',' << format_double(c.epsilon) << ',' << c.period << ','
          << format_double(c.residual_demod) << ',' << format_double(c.residual_identity) << ','
          << format_double(c.residual_quadratic) << '\n';
        if (!g.quiet)
            std::printf("n=%d D_M=%d eps=%g T=%lld: %.3e %.3e %.3e %s\n", c.n, c.d_max, c.epsilon,
                        static_cast<long long>(c.period), c.residual_demod, c.residual_identity, c.residual_quadratic,
                        pass ? "ok" : "FAIL");
    }
    return ok ? kOk : kRuntime;
}

int cmd_reproduce(const Global& g) {
    if (g.target == "table1") return reproduce_table(g, Variant::Unbiased, "table1");
    if (g.target == "table2") return reproduce_table(g, Variant::Classical, "table2");
    if (g.target == "fig2") return reproduce_figure(g, Variant::Unbiased, "fig2", 0.7e-3, 0.3e-4);
    if (g.target == "fig3") return reproduce_figure(g, Variant::Classical, "fig3", 0.2e-2, 0.2e-3);
    if (g.target == "identities") return reproduce_identities(g);
    throw ConfigError("unknown --target \"" + g.target + "\"");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extremum seeking under bounded measurement delays: simulation, bounds and searches"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--config", g.config, "JSON experiment file");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--seed-override", g.seed_override, "replace every seed in the config");
    app.add_flag("--plot", g.plot, "also write an SVG plot");
    app.add_flag("--quiet", g.quiet, "no console summary");

    auto* sim = app.add_subcommand("simulate", "run the configured loop, write trajectory.csv");
    auto* bnd = app.add_subcommand("bounds", "evaluate the bound chain at the configured epsilon");
    bnd->add_option("--sigma", g.sigma, "sigma (default 1.5 sigma0)");
    auto* srch = app.add_subcommand("search", "maximal epsilon by theorem or by simulation");
    srch->add_option("--method", g.method, "theorem | simulation")->capture_default_str();
    srch->add_option("--variant", g.variant, "unbiased | classical (default from config)");
    auto* rep = app.add_subcommand("reproduce", "regenerate a table, figure or identity check");
    rep->add_option("--target", g.target, "table1 | table2 | fig2 | fig3 | identities")->required();
    rep->add_flag("--fast", g.fast, "skip the D_M = 50 simulation rows");
    for (auto* sub : {sim, bnd, srch, rep}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*sim) return cmd_simulate(g);
        if (*bnd) return cmd_bounds(g);
        if (*srch) return cmd_search(g);
        return cmd_reproduce(g);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const RegimeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const ChainUndefined& e) {
        std::fprintf(stderr, "bound chain undefined: %s\n", e.what());
        return kUndefined;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kRuntime;
    }
}
