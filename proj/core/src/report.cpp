#include "snsfem/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace snsfem {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

const char* axis_name(ErrorTable::Axis axis) {
    return axis == ErrorTable::Axis::Time ? "time" : "space";
}

void write_rate_row(std::ostream& os, const char* axis, const char* name, const RateFit& fit) {
    os << axis << "," << name << ",";
    if (fit.valid) {
        os << format_double(fit.slope) << "," << format_double(fit.intercept) << ","
           << format_double(fit.residual) << ",";
    } else {
        os << ",,,";
    }
    os << (fit.valid ? "" : fit.note) << "\n";
}

} // namespace

void write_error_table_csv(const ErrorTable& table, std::ostream& os) {
    os << "axis,level,estimator,value,stderr,n_paths,seed\n";
    const char* axis = axis_name(table.axis);
    for (const LevelEstimate& row : table.rows) {
        const char* names[3] = {"EAu", "EBu", "Ep"};
        const double values[3] = {row.eau, row.ebu, row.ep};
        const double errs[3] = {row.se_eau, row.se_ebu, row.se_ep};
        for (int i = 0; i < 3; ++i) {
            os << axis << "," << format_double(row.level) << "," << names[i] << ","
               << format_double(values[i]) << "," << format_double(errs[i]) << ","
               << row.n_paths_ok << "," << table.master_seed << "\n";
        }
    }
}

void write_rates_csv(const ErrorTable& table, const RateFits& fits, std::ostream& os) {
    os << "axis,estimator,slope,intercept,residual,note\n";
    const char* axis = axis_name(table.axis);
    write_rate_row(os, axis, "EAu", fits.eau);
    write_rate_row(os, axis, "EBu", fits.ebu);
    write_rate_row(os, axis, "Ep", fits.ep);
}

void write_path_summary_csv(const PathSummary& summary, double dt, std::ostream& os) {
    os << "step,time,u_l2,grad_u_l2\n";
    for (std::size_t n = 0; n < summary.u_l2_history.size(); ++n) {
        os << (n + 1) << "," << format_double(dt * static_cast<double>(n + 1)) << ","
           << format_double(summary.u_l2_history[n]) << ","
           << format_double(summary.grad_u_l2_history[n]) << "\n";
    }
}

void write_path_stats_csv(const PathSummary& summary, std::ostream& os) {
    os << "key,value\n";
    os << "n_steps," << summary.n_steps << "\n";
    os << "max_u_l2," << format_double(summary.max_u_l2) << "\n";
    os << "max_grad_u_l2," << format_double(summary.max_grad_u_l2) << "\n";
    os << "max_u_h2_broken," << format_double(summary.max_u_h2_broken) << "\n";
    os << "max_energy_residual," << format_double(summary.max_energy_residual) << "\n";
    os << "max_divergence," << format_double(summary.max_divergence) << "\n";
    os << "max_pressure_mean," << format_double(summary.max_pressure_mean) << "\n";
    os << "max_helmholtz_residual," << format_double(summary.max_helmholtz_residual) << "\n";
    os << "initial_divergence," << format_double(summary.initial_divergence) << "\n";
    os << "total_picard_iterations," << summary.total_picard_iterations << "\n";
    os << "fallback_steps," << summary.fallback_steps << "\n";
}

void write_deterministic_csv(const DeterministicVerifyReport& report, std::ostream& os) {
    os << "n_side,h,err_u_l2,err_u_h1,err_p_l2\n";
    for (const DeterministicLevel& lvl : report.levels) {
        const double h = std::sqrt(2.0) / lvl.n_side;
        os << lvl.n_side << "," << format_double(h) << "," << format_double(lvl.err_u_l2) << ","
           << format_double(lvl.err_u_h1) << "," << format_double(lvl.err_p_l2) << "\n";
    }
    os << "order_u_l2," << format_double(report.order_u_l2.slope) << ",,,\n";
    os << "order_u_h1," << format_double(report.order_u_h1.slope) << ",,,\n";
    os << "order_p_l2," << format_double(report.order_p_l2.slope) << ",,,\n";
}

void write_indicator_csv(const IndicatorStudyResult& result, double epsilon, double kappa0,
                         double kappa, std::ostream& os) {
    os << "set,fraction,epsilon,kappa0,kappa,h,k,n_paths\n";
    const char* names[6] = {"omega_k", "omega_h", "omega_hh", "omega_kh", "omega_kappa0",
                            "omega_kappa"};
    const double values[6] = {result.fractions.omega_k,      result.fractions.omega_h,
                              result.fractions.omega_hh,     result.fractions.omega_kh,
                              result.fractions.omega_kappa0, result.fractions.omega_kappa};
    for (int i = 0; i < 6; ++i) {
        os << names[i] << "," << format_double(values[i]) << "," << format_double(epsilon) << ","
           << format_double(kappa0) << "," << format_double(kappa) << ","
           << format_double(result.h) << "," << format_double(result.k) << "," << result.n_paths
           << "\n";
    }
}

namespace {

struct PlotBox {
    double x0, x1, y0, y1; // log10 ranges
    static constexpr double width = 640.0, height = 480.0;
    static constexpr double ml = 70.0, mr = 160.0, mt = 40.0, mb = 50.0;

    double px(double x) const {
        return ml + (std::log10(x) - x0) / (x1 - x0) * (width - ml - mr);
    }
    double py(double y) const {
        return height - mb - (std::log10(y) - y0) / (y1 - y0) * (height - mt - mb);
    }
};

} // namespace

void write_svg_loglog(const std::string& title, const std::string& x_label,
                      const std::vector<SvgSeries>& series, std::ostream& os) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const SvgSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (s.y[i] <= 0.0 || s.x[i] <= 0.0) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!(xmin < xmax) || !(ymin <= ymax)) {
        os << "<svg xmlns='http://www.w3.org/2000/svg'/>\n";
        return;
    }
    PlotBox box{std::log10(xmin) - 0.1, std::log10(xmax) + 0.1, std::log10(ymin) - 0.4,
                std::log10(ymax) + 0.4};

    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << PlotBox::width << "' height='"
       << PlotBox::height << "' viewBox='0 0 " << PlotBox::width << " " << PlotBox::height
       << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << PlotBox::width / 2 << "' y='24' text-anchor='middle' font-size='16'>"
       << title << "</text>\n";
    os << "<text x='" << PlotBox::width / 2 << "' y='" << PlotBox::height - 12
       << "' text-anchor='middle' font-size='12'>" << x_label << " (log)</text>\n";
    // axes
    os << "<line x1='" << PlotBox::ml << "' y1='" << PlotBox::height - PlotBox::mb << "' x2='"
       << PlotBox::width - PlotBox::mr << "' y2='" << PlotBox::height - PlotBox::mb
       << "' stroke='black'/>\n";
    os << "<line x1='" << PlotBox::ml << "' y1='" << PlotBox::mt << "' x2='" << PlotBox::ml
       << "' y2='" << PlotBox::height - PlotBox::mb << "' stroke='black'/>\n";

    // reference order lines through the first series' last point
    static const double slopes[3] = {0.5, 1.0, 2.0};
    if (!series.empty() && !series[0].x.empty()) {
        const double xa = series[0].x.front(), xb = series[0].x.back();
        const double yb = series[0].y.back();
        for (double slope : slopes) {
            const double ya = yb * std::pow(xa / xb, slope);
            os << "<line x1='" << box.px(xa) << "' y1='" << box.py(ya) << "' x2='" << box.px(xb)
               << "' y2='" << box.py(yb) << "' stroke='gray' stroke-dasharray='4,3'/>\n";
            os << "<text x='" << box.px(xa) + 4 << "' y='" << box.py(ya) - 4
               << "' font-size='10' fill='gray'>slope " << slope << "</text>\n";
        }
    }

    static const char* colors[4] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 4];
        os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (series[s].y[i] <= 0.0) continue;
            os << box.px(series[s].x[i]) << "," << box.py(series[s].y[i]) << " ";
        }
        os << "'/>\n";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (series[s].y[i] <= 0.0) continue;
            os << "<circle cx='" << box.px(series[s].x[i]) << "' cy='" << box.py(series[s].y[i])
               << "' r='3' fill='" << color << "'/>\n";
        }
        os << "<text x='" << PlotBox::width - PlotBox::mr + 10 << "' y='"
           << PlotBox::mt + 16 * static_cast<double>(s + 1) << "' font-size='12' fill='" << color
           << "'>" << series[s].label << "</text>\n";
    }
    os << "</svg>\n";
}

} // namespace snsfem
