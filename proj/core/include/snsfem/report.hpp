#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "snsfem/experiments.hpp"

namespace snsfem {

/// CSV with the fixed columns axis,level,estimator,value,stderr,n_paths,seed;
/// one row per (level, estimator). Deterministic byte output for fixed input.
void write_error_table_csv(const ErrorTable& table, std::ostream& os);

/// CSV rows axis,estimator,slope,intercept,residual,note.
void write_rates_csv(const ErrorTable& table, const RateFits& fits, std::ostream& os);

/// Per-step trajectory CSV: step,time,u_l2,grad_u_l2.
void write_path_summary_csv(const PathSummary& summary, double dt, std::ostream& os);

/// Key,value CSV of the trajectory maxima and residual diagnostics.
void write_path_stats_csv(const PathSummary& summary, std::ostream& os);

/// CSV n_side,h,err_u_l2,err_u_h1,err_p_l2 plus fitted orders.
void write_deterministic_csv(const DeterministicVerifyReport& report, std::ostream& os);

/// CSV set,fraction plus the parameters the sets were evaluated at.
void write_indicator_csv(const IndicatorStudyResult& result, double epsilon, double kappa0,
                         double kappa, std::ostream& os);

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal log-log scatter/line plot with reference order lines (slopes 0.5,
/// 1 and 2) anchored at the first series' last point.
void write_svg_loglog(const std::string& title, const std::string& x_label,
                      const std::vector<SvgSeries>& series, std::ostream& os);

/// Full-precision deterministic double formatting shared by the writers.
std::string format_double(double v);

} // namespace snsfem
