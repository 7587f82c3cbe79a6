#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snsfem/stepper.hpp"

namespace snsfem {

/// Monte Carlo estimates of the coupled-refinement errors EAu, EBu, Ep at a
/// list of levels. Estimates are sqrt(mean of squared path differences);
/// the reported standard errors are sample std of the squared differences
/// over sqrt(n_paths).
struct LevelEstimate {
    double level = 0.0; ///< k for the time axis, h for the space axis
    double eau = 0.0, ebu = 0.0, ep = 0.0;
    double se_eau = 0.0, se_ebu = 0.0, se_ep = 0.0;
    int n_paths_ok = 0;
};

struct ErrorTable {
    enum class Axis { Time, Space };
    Axis axis = Axis::Time;
    std::vector<LevelEstimate> rows;
    int n_paths = 0;
    std::uint64_t master_seed = 0;
    int failed_paths = 0;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0; ///< rms residual of the log-log fit
    bool valid = false;
    std::string note;
};

struct RateFits {
    RateFit eau, ebu, ep;
};

/// Least-squares slope of log(estimate) against log(level); requires >= 3
/// levels. Estimators with a nonpositive estimate at any level are skipped
/// with a notice.
RateFits fit_rate(const ErrorTable& table);
RateFit fit_loglog(const std::vector<double>& levels, const std::vector<double>& values);

/// Exact nodal transfer of a coarse field onto the uniform refinement
/// (fine n_side must be exactly twice the coarse). Coarse P1/P2 functions
/// are in the fine space, so the transfer is pointwise exact.
FieldCoefficients prolong(const MeshTopology& coarse_mesh, const DofMap& coarse_map,
                          const FieldCoefficients& coarse_field,
                          const MeshTopology& fine_mesh, const DofMap& fine_map);

/// Strong errors of one path simulated at the stepper's k and at k/2 on the
/// same mesh and the same Wiener path.
struct CoupledTimeStats {
    PathSummary coarse, fine;
    double final_diff_l2_sq = 0.0;
    double final_diff_h1_sq = 0.0;
    double pressure_integral_diff_l2_sq = 0.0;
    double max_diff_l2_sq = 0.0;      ///< over coincident times
    double max_grad_diff_l2_sq = 0.0;
};
CoupledTimeStats run_coupled_time_pair(Stepper& coarse, Stepper& fine, const WienerPath& path);

/// Strong errors of one path simulated at h and h/2 with identical k and
/// identical increment coefficients; differences evaluated on the fine mesh.
struct CoupledSpaceStats {
    PathSummary coarse, fine;
    double final_diff_l2_sq = 0.0;
    double final_diff_h1_sq = 0.0;
    double pressure_integral_diff_l2_sq = 0.0;
};
CoupledSpaceStats run_coupled_space_pair(Stepper& coarse, Stepper& fine, const WienerPath& path);

/// EAu_k / EBu_k / Ep_k over a list of step counts (levels are k = T/N);
/// every path is simulated at k and k/2 on the same Brownian path, drawn
/// from one fine lattice shared by all levels.
ErrorTable time_convergence_study(const SchemeConfig& base, const std::vector<int>& n_steps_levels,
                                  int n_paths, std::uint64_t master_seed, int n_threads = 1);

/// EAu_h / EBu_h / Ep_h over a list of n_side levels at fixed k.
ErrorTable space_convergence_study(const SchemeConfig& base, const std::vector<int>& n_side_levels,
                                   int n_paths, std::uint64_t master_seed, int n_threads = 1);

/// Steady Taylor-Green vortex with phases; the convection gradient cancels
/// against the pressure so the forcing is 8 pi^2 nu u.
struct ManufacturedTaylorGreen {
    double nu = 1.0;
    double phase_x = 0.35;
    double phase_y = 0.71;

    AnalyticField velocity() const;
    AnalyticField pressure() const;
    AnalyticField forcing() const;
};

struct DeterministicLevel {
    int n_side = 0;
    double err_u_l2 = 0.0;
    double err_u_h1 = 0.0;
    double err_p_l2 = 0.0;
};

struct DeterministicVerifyReport {
    std::vector<DeterministicLevel> levels;
    RateFit order_u_l2, order_u_h1, order_p_l2;
    bool within_bands = false; ///< L2 3.0+-0.2, H1 2.0+-0.2, pressure 2.0+-0.3
};

/// Solve the steady manufactured problem on each mesh and fit observed orders.
DeterministicVerifyReport deterministic_verify(double nu, const std::vector<int>& n_sides,
                                               double picard_tol = 1e-12);

/// Discrete inf-sup constant: sqrt of the smallest nonzero eigenvalue of the
/// pressure Schur complement B K^+ B^T measured against the pressure mass.
double inf_sup_constant(const MeshTopology& mesh, const DofMap& velocity,
                        const DofMap& pressure);

/// Monte Carlo E[max_n ||u_h^n||^2] at the base configuration and after one
/// h- and one k-refinement, on coupled paths.
struct MomentStabilityReport {
    double base = 0.0;
    double h_refined = 0.0;
    double k_refined = 0.0;
    int n_paths = 0;
};
MomentStabilityReport moment_stability_probe(const SchemeConfig& base, int n_paths,
                                             std::uint64_t master_seed, int n_threads = 1);

/// Indicator-set membership fractions over coupled (k, k/2) runs; the finer
/// run serves as the reference trajectory.
struct IndicatorStudyResult {
    IndicatorFractions fractions;
    int n_paths = 0;
    double h = 0.0, k = 0.0;
};
IndicatorStudyResult indicator_study(const SchemeConfig& base, int n_paths,
                                     std::uint64_t master_seed, double epsilon, double kappa0,
                                     double kappa, int n_threads = 1);

} // namespace snsfem
