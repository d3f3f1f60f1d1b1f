#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esd/bounds.hpp"
#include "esd/estimator.hpp"
#include "esd/feasibility.hpp"
#include "esd/plant.hpp"

namespace esd {

struct DelaySpec {
    /// "zero", "constant", "uniform" or "sequence".
    std::string variant = "zero";
    int d_max = 0;
    /// Constant delay value.
    int d = 0;
    std::optional<std::uint64_t> seed;
    std::vector<int> values;
};

/// One experiment as read from a JSON config file.
///
/// Sections map, uncertainty, delay, dither, gains and run are required; search is
/// optional. Unknown keys anywhere are rejected.
struct RunSpec {
    Vec theta_star;
    double q_star = 0.0;
    Mat hessian;
    UncertaintyBounds uncertainty;
    DelaySpec delay;
    Vec amplitudes;
    double epsilon = 1e-4;
    EsParams params;
    std::int64_t horizon = 0;
    Vec theta0;
    std::optional<std::uint64_t> seed;
    std::int64_t decimation = 0;
    SearchConfig search;

    QuadraticMap map() const;
    DelayModel delay_model() const;
    EsRunConfig run_config() const;
    SimTemplate sim_template() const;
    BoundInputs bound_inputs(double sigma) const;

    /// Replaces every seed: run.seed, delay.seed and the search seed list.
    void override_seed(std::uint64_t seed);

    /// The worked 3-D example with the given variant, D_M and ε.
    static RunSpec example(Variant variant, int d_max, double epsilon);
};

/// Parses and validates; errors are ConfigError carrying the field path or the
/// line/column of a syntax error.
RunSpec parse_run_spec(const std::string& text);
RunSpec load_run_spec(const std::string& path);
/// Pretty-printed JSON; parse_run_spec(serialize(s)) reproduces s.
std::string serialize(const RunSpec& spec);

}  // namespace esd
