#include "esd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace esd {

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const PlotOptions& opt) {
    const double left = 80, right = 20, top = 40, bottom = 60;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;

    auto ty = [&](double y) { return opt.log_y ? std::log10(y) : y; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const PlotSeries& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (opt.log_y && !(s.y[i] > 0.0)) continue;
            if (!std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (opt.log_y) {
        y0 = std::floor(y0);
        y1 = std::ceil(y1);
    }
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        os << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
           << xml_escape(opt.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    // y ticks: every decade on a log axis, 5 divisions otherwise
    const int ydiv = opt.log_y ? static_cast<int>(y1 - y0) : 5;
    const int ystride = std::max(1, ydiv / 10);
    for (int i = 0; i <= ydiv; i += ystride) {
        const double v = y0 + (y1 - y0) * i / ydiv;
        const double y = py(v);
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y << "\" y2=\"" << y
           << "\" stroke=\"#ddd\"/>\n";
        const std::string label = opt.log_y ? "1e" + std::to_string(static_cast<int>(std::lround(v))) : fmt("%.3g", v);
        os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double v = x0 + (x1 - x0) * i / 5;
        os << "<text x=\"" << px(v) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt("%.3g", v)
           << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 15 << "\" text-anchor=\"middle\">"
       << xml_escape(opt.x_label) << "</text>\n";
    os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << xml_escape(opt.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const PlotSeries& s = series[k];
        const char* color = kColors[k % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if ((opt.log_y && !(s.y[i] > 0.0)) || !std::isfinite(s.y[i])) continue;
            os << fmt("%.2f", px(s.x[i])) << ',' << fmt("%.2f", py(ty(s.y[i]))) << ' ';
        }
        os << "\"/>\n";
        const double ly = top + 16 + 16.0 * static_cast<double>(k);
        os << "<line x1=\"" << left + pw - 170 << "\" x2=\"" << left + pw - 150 << "\" y1=\"" << ly - 4 << "\" y2=\""
           << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw - 145 << "\" y=\"" << ly << "\">" << xml_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

PlotSeries error_series(const Trajectory& traj, std::string label) {
    PlotSeries s;
    s.label = std::move(label);
    for (const TrajectoryRecord& r : traj.records) {
        s.x.push_back(static_cast<double>(r.j));
        s.y.push_back(r.window_max_err);
    }
    return s;
}

namespace {

struct ChainEntry {
    const char* key;
    double value;
};

std::vector<ChainEntry> chain_entries(const BoundInputs& in, const BoundChain& c) {
    std::vector<ChainEntry> e = {{"rho_bar_1", c.rho_bar[0]}, {"rho_bar_2", c.rho_bar[1]},
                                 {"rho_bar_3", c.rho_bar[2]}, {"rho_bar_4", c.rho_bar[3]},
                                 {"sigma_y", c.sigma_y}};
    if (in.variant == Variant::Unbiased) e.push_back({"sigma_eta", c.sigma_eta});
    e.push_back({"delta", c.delta});
    e.push_back({"delta_out", c.delta_out});
    e.push_back({"delta_g", c.delta_g});
    e.push_back({"delta_y", c.delta_y});
    return e;
}

}  // namespace

void render_chain(std::ostream& os, const BoundInputs& in, const BoundChain& chain) {
    os << "variant " << to_string(in.variant) << ", D_M " << in.d_max << ", regime " << to_string(in.regime)
       << ", epsilon " << format_double(in.epsilon) << ", sigma " << format_double(in.sigma) << '\n';
    os << "evaluation order: rho_bar -> sigma_y"
       << (in.variant == Variant::Unbiased ? " -> sigma_eta" : "")
       << " -> delta -> delta_out -> delta_g -> delta_y\n";
    char line[96];
    for (const ChainEntry& e : chain_entries(in, chain)) {
        std::snprintf(line, sizeof line, "  %-10s %.10g\n", e.key, e.value);
        os << line;
    }
}

void write_chain_csv(std::ostream& os, const BoundInputs& in, const BoundChain& chain) {
    os << "key,value\n";
    os << "variant," << to_string(in.variant) << '\n';
    os << "D_M," << in.d_max << '\n';
    os << "epsilon," << format_double(in.epsilon) << '\n';
    os << "sigma," << format_double(in.sigma) << '\n';
    for (const ChainEntry& e : chain_entries(in, chain)) os << e.key << ',' << format_double(e.value) << '\n';
}

void render_report(std::ostream& os, const FeasibilityReport& r) {
    os << to_string(r.method) << " search, " << to_string(r.variant) << ", D_M " << r.d_max << ": ";
    if (!r.found) {
        os << "nothing found";
    } else {
        char buf[128];
        std::snprintf(buf, sizeof buf, "epsilon* %.4g at sigma %.4g, decay rate 1 - %.4g", r.epsilon_star, r.sigma,
                      r.decay_gap);
        os << buf;
    }
    if (!r.note.empty()) os << " (" << r.note << ')';
    os << '\n';
    for (const Margin& m : r.margins) os << "  margin " << m.name << ' ' << format_double(m.value) << '\n';
    for (const SimVerdict& v : r.evaluations) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "  eps %.4g horizon %lld: %s", v.epsilon, static_cast<long long>(v.horizon),
                      v.pass ? "pass" : "fail");
        os << buf;
        if (!v.pass) os << " - " << v.reason();
        os << '\n';
    }
}

IdentityCase identity_case(int n, int d_max, double epsilon, const Mat& hessian, std::int64_t t) {
    const DitherConfig cfg(Vec::Constant(n, 0.1), epsilon, d_max);
    const AveragingSums s = averaging_sums(cfg, hessian, t);
    IdentityCase c{n, d_max, epsilon, cfg.period(), 0.0, 0.0, 0.0};
    c.residual_demod = s.mean_demod.cwiseAbs().maxCoeff();
    c.residual_identity = (s.mean_demod_dither - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    c.residual_quadratic = s.mean_demod_quadratic.cwiseAbs().maxCoeff();
    return c;
}

std::vector<IdentityCase> identity_suite() {
    Mat h1(1, 1);
    h1 << 2.0;
    Mat h2(2, 2);
    h2 << 3.0, 1.0, 1.0, 2.0;
    Mat h3(3, 3);
    h3 << 100.0, 30.0, 5.0, 30.0, 20.0, 5.0, 5.0, 5.0, 50.0;
    return {identity_case(1, 0, 1e-4, h1), identity_case(3, 0, 1e-4, h3), identity_case(3, 5, 1e-4, h3),
            identity_case(2, 3, 4e-4, h2)};
}

}  // namespace esd
