#include "esd/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "esd/errors.hpp"

namespace esd {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Typed, path-aware view of one JSON object.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool known = false;
            for (const char* k : keys) known = known || it.key() == k;
            if (!known) fail(join(path_, it.key()), "unknown key");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    std::string path(const char* key) const { return join(path_, key); }

    Node child(const char* key) const { return Node(get(key), path(key)); }

    double number(const char* key) const { return as_number(get(key), path(key)); }
    double number_or(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::int64_t integer(const char* key) const { return as_integer(get(key), path(key)); }
    std::int64_t integer_or(const char* key, std::int64_t fallback) const { return has(key) ? integer(key) : fallback; }

    std::uint64_t unsigned_int(const char* key) const { return as_unsigned(get(key), path(key)); }

    std::string str(const char* key) const {
        const json& v = get(key);
        if (!v.is_string()) fail(path(key), "expected a string");
        return v.get<std::string>();
    }

    Vec vec(const char* key) const {
        const json& v = get(key);
        if (!v.is_array() || v.empty()) fail(path(key), "expected a nonempty array of numbers");
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i)
            out(static_cast<Eigen::Index>(i)) = as_number(v[i], path(key) + "[" + std::to_string(i) + "]");
        return out;
    }

    Mat matrix(const char* key) const {
        const json& v = get(key);
        if (!v.is_array() || v.empty()) fail(path(key), "expected a nonempty array of rows");
        const std::size_t rows = v.size();
        Mat out;
        for (std::size_t r = 0; r < rows; ++r) {
            const std::string rp = path(key) + "[" + std::to_string(r) + "]";
            if (!v[r].is_array() || v[r].size() != rows) fail(rp, "expected a row of " + std::to_string(rows) + " numbers");
            if (r == 0) out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
            for (std::size_t c = 0; c < rows; ++c)
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    as_number(v[r][c], rp + "[" + std::to_string(c) + "]");
        }
        return out;
    }

    std::vector<std::int64_t> integers(const char* key) const {
        const json& v = get(key);
        if (!v.is_array()) fail(path(key), "expected an array of integers");
        std::vector<std::int64_t> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(as_integer(v[i], path(key) + "[" + std::to_string(i) + "]"));
        return out;
    }

    std::vector<std::uint64_t> unsigned_ints(const char* key) const {
        const json& v = get(key);
        if (!v.is_array()) fail(path(key), "expected an array of integers");
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(as_unsigned(v[i], path(key) + "[" + std::to_string(i) + "]"));
        return out;
    }

private:
    const json& get(const char* key) const {
        auto it = j_.find(key);
        if (it == j_.end()) fail(path(key), "missing");
        return *it;
    }

    static double as_number(const json& v, const std::string& p) {
        if (!v.is_number()) fail(p, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(p, "must be finite");
        return d;
    }

    static std::int64_t as_integer(const json& v, const std::string& p) {
        if (v.is_number_unsigned()) {
            if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) fail(p, "integer out of range");
            return static_cast<std::int64_t>(v.get<std::uint64_t>());
        }
        if (!v.is_number_integer()) fail(p, "expected an integer");
        return v.get<std::int64_t>();
    }

    static std::uint64_t as_unsigned(const json& v, const std::string& p) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        fail(p, "expected a nonnegative integer");
    }

    const json& j_;
    std::string path_;
};

int small_int(std::int64_t v, const std::string& path) {
    if (v < 0 || v > 1000000) fail(path, "must be in [0, 1000000]");
    return static_cast<int>(v);
}

EpsilonBracket read_bracket(const Node& n) {
    n.allow({"lo", "hi"});
    return {n.number("lo"), n.number("hi")};
}

ConvergenceCriterion read_criterion(const Node& n) {
    n.allow({"mode", "tail_fraction", "fail_ratio", "windows", "radius_slack", "sigma"});
    ConvergenceCriterion c;
    const std::string mode = n.str("mode");
    if (mode == "unbiased_exponential")
        c.mode = CriterionMode::UnbiasedExponential;
    else if (mode == "classical_practical")
        c.mode = CriterionMode::ClassicalPractical;
    else
        fail(n.path("mode"), "must be \"unbiased_exponential\" or \"classical_practical\"");
    c.tail_fraction = n.number_or("tail_fraction", c.tail_fraction);
    c.fail_ratio = n.number_or("fail_ratio", c.fail_ratio);
    c.windows = small_int(n.integer_or("windows", c.windows), n.path("windows"));
    c.radius_slack = n.number_or("radius_slack", c.radius_slack);
    if (n.has("sigma")) c.sigma = n.number("sigma");
    return c;
}

SearchConfig read_search(const Node& n) {
    n.allow({"sigma_grid", "epsilon_bracket", "sim_bracket", "tol", "max_bisections", "probe_points",
             "fallback_points", "strict", "sim_horizon", "horizon_decays", "sim_horizon_max", "sim_seeds",
             "criterion", "threads"});
    SearchConfig s;
    if (n.has("sigma_grid")) {
        const Node g = n.child("sigma_grid");
        g.allow({"min", "max", "steps"});
        s.sigma_grid = SigmaGrid{g.number("min"), g.number("max"), small_int(g.integer("steps"), g.path("steps"))};
    }
    if (n.has("epsilon_bracket")) s.epsilon_bracket = read_bracket(n.child("epsilon_bracket"));
    if (n.has("sim_bracket")) s.sim_bracket = read_bracket(n.child("sim_bracket"));
    s.tol = n.number_or("tol", s.tol);
    s.max_bisections = small_int(n.integer_or("max_bisections", s.max_bisections), n.path("max_bisections"));
    s.probe_points = small_int(n.integer_or("probe_points", s.probe_points), n.path("probe_points"));
    s.fallback_points = small_int(n.integer_or("fallback_points", s.fallback_points), n.path("fallback_points"));
    s.strict = n.number_or("strict", s.strict);
    s.sim_horizon = n.integer_or("sim_horizon", s.sim_horizon);
    s.horizon_decays = n.number_or("horizon_decays", s.horizon_decays);
    s.sim_horizon_max = n.integer_or("sim_horizon_max", s.sim_horizon_max);
    if (n.has("sim_seeds")) s.sim_seeds = n.unsigned_ints("sim_seeds");
    if (n.has("criterion")) s.criterion = read_criterion(n.child("criterion"));
    s.threads = static_cast<unsigned>(small_int(n.integer_or("threads", s.threads), n.path("threads")));
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("search: ") + e.what());
    }
    return s;
}

json to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(row);
    }
    return a;
}

json to_json(const EpsilonBracket& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

json to_json(const SearchConfig& s) {
    json j;
    if (s.sigma_grid) j["sigma_grid"] = {{"min", s.sigma_grid->min}, {"max", s.sigma_grid->max}, {"steps", s.sigma_grid->steps}};
    j["epsilon_bracket"] = to_json(s.epsilon_bracket);
    j["sim_bracket"] = to_json(s.sim_bracket);
    j["tol"] = s.tol;
    j["max_bisections"] = s.max_bisections;
    j["probe_points"] = s.probe_points;
    j["fallback_points"] = s.fallback_points;
    j["strict"] = s.strict;
    j["sim_horizon"] = s.sim_horizon;
    j["horizon_decays"] = s.horizon_decays;
    j["sim_horizon_max"] = s.sim_horizon_max;
    j["sim_seeds"] = s.sim_seeds;
    if (s.criterion) {
        const ConvergenceCriterion& c = *s.criterion;
        json cj = {{"mode", c.mode == CriterionMode::UnbiasedExponential ? "unbiased_exponential" : "classical_practical"},
                   {"tail_fraction", c.tail_fraction},
                   {"fail_ratio", c.fail_ratio},
                   {"windows", c.windows},
                   {"radius_slack", c.radius_slack}};
        if (c.sigma) cj["sigma"] = *c.sigma;
        j["criterion"] = cj;
    }
    j["threads"] = s.threads;
    return j;
}

void read_delay(const Node& n, DelaySpec& d) {
    n.allow({"variant", "d_max", "d", "seed", "values"});
    d.variant = n.str("variant");
    if (n.has("seed")) d.seed = n.unsigned_int("seed");
    if (d.variant == "zero") {
        d.d_max = small_int(n.integer_or("d_max", 0), n.path("d_max"));
        if (d.d_max != 0) fail(n.path("d_max"), "zero delay requires d_max = 0");
    } else if (d.variant == "constant") {
        d.d = small_int(n.integer("d"), n.path("d"));
        d.d_max = small_int(n.integer_or("d_max", d.d), n.path("d_max"));
        if (d.d > d.d_max) fail(n.path("d"), "exceeds d_max");
    } else if (d.variant == "uniform") {
        d.d_max = small_int(n.integer("d_max"), n.path("d_max"));
    } else if (d.variant == "sequence") {
        d.d_max = small_int(n.integer("d_max"), n.path("d_max"));
        const auto vals = n.integers("values");
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (vals[i] < 0 || vals[i] > d.d_max)
                fail(n.path("values") + "[" + std::to_string(i) + "]", "delay outside [0, d_max]");
            d.values.push_back(static_cast<int>(vals[i]));
        }
    } else {
        fail(n.path("variant"), "must be one of zero, constant, uniform, sequence");
    }
}

json delay_json(const DelaySpec& d) {
    json j = {{"variant", d.variant}, {"d_max", d.d_max}};
    if (d.variant == "constant") j["d"] = d.d;
    if (d.variant == "sequence") j["values"] = d.values;
    if (d.seed) j["seed"] = *d.seed;
    return j;
}

}  // namespace

RunSpec parse_run_spec(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("syntax error: ") + e.what());
    }
    const Node top(root, "");
    top.allow({"map", "uncertainty", "delay", "dither", "gains", "run", "search"});
    RunSpec s;

    const Node m = top.child("map");
    m.allow({"theta_star", "q_star", "hessian"});
    s.theta_star = m.vec("theta_star");
    s.q_star = m.number("q_star");
    s.hessian = m.matrix("hessian");
    if (s.hessian.rows() != s.theta_star.size())
        fail(m.path("hessian"), "size does not match theta_star (" + std::to_string(s.theta_star.size()) + ")");
    try {
        (void)s.map();
    } catch (const std::exception& e) {
        fail(m.path("hessian"), e.what());
    }

    const Node u = top.child("uncertainty");
    u.allow({"h_min", "h_max", "sigma0", "q0", "delta_q"});
    s.uncertainty = {u.number("h_min"), u.number("h_max"), u.number("sigma0"), u.number("q0"), u.number("delta_q")};
    try {
        s.uncertainty.validate();
    } catch (const std::exception& e) {
        fail("uncertainty", e.what());
    }

    read_delay(top.child("delay"), s.delay);

    const Node d = top.child("dither");
    d.allow({"amplitudes", "epsilon"});
    s.amplitudes = d.vec("amplitudes");
    s.epsilon = d.number("epsilon");
    if (s.amplitudes.size() != s.theta_star.size()) fail(d.path("amplitudes"), "size does not match theta_star");
    for (Eigen::Index i = 0; i < s.amplitudes.size(); ++i)
        if (!(s.amplitudes(i) > 0.0)) fail(d.path("amplitudes") + "[" + std::to_string(i) + "]", "must be positive");
    if (!(s.epsilon > 0.0)) fail(d.path("epsilon"), "must be positive");

    const Node g = top.child("gains");
    g.allow({"k", "lambda", "omega_h", "alpha0"});
    s.params.k = g.number("k");
    s.params.lambda = g.number("lambda");
    s.params.omega_h = g.number("omega_h");
    s.params.alpha0 = g.number("alpha0");
    s.params.epsilon = s.epsilon;

    const Node r = top.child("run");
    r.allow({"variant", "horizon", "theta0", "seed", "decimation"});
    try {
        s.params.variant = parse_variant(r.str("variant"));
    } catch (const ConfigError& e) {
        fail(r.path("variant"), e.what());
    }
    s.horizon = r.integer("horizon");
    if (s.horizon < 0) fail(r.path("horizon"), "must be nonnegative");
    s.theta0 = r.vec("theta0");
    if (s.theta0.size() != s.theta_star.size()) fail(r.path("theta0"), "size does not match theta_star");
    if (r.has("seed")) s.seed = r.unsigned_int("seed");
    s.decimation = r.integer_or("decimation", 0);
    if (s.decimation < 0) fail(r.path("decimation"), "must be nonnegative");
    try {
        s.params.validate();
    } catch (const std::exception& e) {
        fail("gains", e.what());
    }

    if (s.delay.variant == "uniform" && !s.delay.seed && !s.seed)
        fail("delay.seed", "a uniform random delay needs a seed (delay.seed or run.seed)");

    if (top.has("search")) s.search = read_search(top.child("search"));
    return s;
}

RunSpec load_run_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_run_spec(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string serialize(const RunSpec& s) {
    json j;
    j["map"] = {{"theta_star", to_json(s.theta_star)}, {"q_star", s.q_star}, {"hessian", to_json(s.hessian)}};
    j["uncertainty"] = {{"h_min", s.uncertainty.h_min},
                        {"h_max", s.uncertainty.h_max},
                        {"sigma0", s.uncertainty.sigma0},
                        {"q0", s.uncertainty.q0},
                        {"delta_q", s.uncertainty.delta_q}};
    j["delay"] = delay_json(s.delay);
    j["dither"] = {{"amplitudes", to_json(s.amplitudes)}, {"epsilon", s.epsilon}};
    j["gains"] = {{"k", s.params.k}, {"lambda", s.params.lambda}, {"omega_h", s.params.omega_h}, {"alpha0", s.params.alpha0}};
    json run = {{"variant", to_string(s.params.variant)},
                {"horizon", s.horizon},
                {"theta0", to_json(s.theta0)},
                {"decimation", s.decimation}};
    if (s.seed) run["seed"] = *s.seed;
    j["run"] = run;
    j["search"] = to_json(s.search);
    return j.dump(2) + "\n";
}

QuadraticMap RunSpec::map() const { return QuadraticMap(theta_star, q_star, hessian); }

DelayModel RunSpec::delay_model() const {
    const std::uint64_t sd = delay.seed ? *delay.seed : seed.value_or(0);
    if (delay.variant == "zero") return DelayModel::zero();
    if (delay.variant == "constant") return DelayModel::constant(delay.d, delay.d_max);
    if (delay.variant == "uniform") return DelayModel::uniform(delay.d_max, sd);
    return DelayModel::sequence(delay.values, delay.d_max);
}

EsRunConfig RunSpec::run_config() const {
    EsParams p = params;
    p.epsilon = epsilon;
    return EsRunConfig::make(map(), delay_model(), amplitudes, p, theta0, uncertainty.q0, horizon, seed, decimation);
}

SimTemplate RunSpec::sim_template() const {
    EsParams p = params;
    p.epsilon = epsilon;
    return {map(), delay_model(), amplitudes, p, theta0, uncertainty.q0, uncertainty};
}

BoundInputs RunSpec::bound_inputs(double sigma) const { return sim_template().bound_inputs(epsilon, sigma); }

void RunSpec::override_seed(std::uint64_t s) {
    seed = s;
    if (delay.variant == "uniform") delay.seed = s;
    search.sim_seeds = {s};
}

RunSpec RunSpec::example(Variant variant, int d_max, double eps) {
    const ExampleSetup ex = ExampleSetup::standard();
    RunSpec s;
    s.theta_star = ex.map.theta_star();
    s.q_star = ex.map.q_star();
    s.hessian = ex.map.hessian();
    s.uncertainty = ex.uncertainty;
    s.delay.variant = d_max == 0 ? "zero" : "uniform";
    s.delay.d_max = d_max;
    if (d_max > 0) s.delay.seed = 1;
    s.amplitudes = ex.amplitudes;
    s.epsilon = eps;
    s.params = ex.params;
    s.params.variant = variant;
    s.params.epsilon = eps;
    s.horizon = 2000000;
    s.theta0 = ex.theta0;
    s.seed = 1;
    return s;
}

}  // namespace esd
