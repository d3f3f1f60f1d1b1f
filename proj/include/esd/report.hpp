#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "esd/bounds.hpp"
#include "esd/estimator.hpp"
#include "esd/feasibility.hpp"

namespace esd {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label = "j";
    std::string y_label = "|theta_hat - theta*|";
    bool log_y = true;
    int width = 760;
    int height = 460;
};

/// Self-contained SVG line plot. Nonpositive values are dropped on a log axis.
void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const PlotOptions& opt);

/// err against j from the decimated records, using each record's window maximum.
PlotSeries error_series(const Trajectory& traj, std::string label);

/// ρ̄ and the chain, one entry per line in evaluation order.
void render_chain(std::ostream& os, const BoundInputs& in, const BoundChain& chain);
/// key,value rows for the same quantities.
void write_chain_csv(std::ostream& os, const BoundInputs& in, const BoundChain& chain);

void render_report(std::ostream& os, const FeasibilityReport& r);

struct IdentityCase {
    int n = 0;
    int d_max = 0;
    double epsilon = 0.0;
    std::int64_t period = 0;
    /// ‖mean M‖∞, max |mean MSᵀ − I|, ‖mean M·SᵀHS‖∞
    double residual_demod = 0.0;
    double residual_identity = 0.0;
    double residual_quadratic = 0.0;
};

/// Window averages for (n, D_M, ε) ∈ {(1,0,1e-4), (3,0,1e-4), (3,5,1e-4), (2,3,4e-4)}.
std::vector<IdentityCase> identity_suite();
IdentityCase identity_case(int n, int d_max, double epsilon, const Mat& hessian, std::int64_t t = 0);

}  // namespace esd
