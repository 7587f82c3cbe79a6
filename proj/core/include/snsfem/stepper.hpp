#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "snsfem/assembly.hpp"
#include "snsfem/helmholtz.hpp"
#include "snsfem/linsolve.hpp"
#include "snsfem/noise.hpp"

namespace snsfem {

/// How the implicit Step II system is driven to its fixed point. Both
/// variants converge to the same solution of the nonlinear system (residual
/// below picard_tol); they differ only in cost per iteration.
/// - FrozenPicard: convection frozen at the previous iterate and kept inside
///   the matrix; one sparse factorization per iteration.
/// - LaggedFixedPoint: convection moved to the right-hand side; reuses one
///   Stokes factorization per (mesh, k) across all steps and paths, and
///   falls back to FrozenPicard on stagnation.
enum class NonlinearStrategy { FrozenPicard, LaggedFixedPoint };

struct SchemeConfig {
    double nu = 1.0;
    double T = 1.0;
    int n_steps = 128;  ///< N, k = T/N
    int n_side = 32;    ///< spatial resolution (cells per side)
    NoiseSpec noise;
    DiffusionOperator diffusion = DiffusionOperator::sqrt_one_plus_square();
    Vec2 body_force{0.0, 0.0};
    double picard_tol = 1e-10;
    int picard_max = 50;
    double linear_tol = 1e-10;
    int quad_degree = 6; ///< rule for stochastic/nonlinear terms
    NonlinearStrategy nonlinear = NonlinearStrategy::LaggedFixedPoint;
    int observer_stride = 1; ///< run observers every this many steps

    double dt() const { return T / n_steps; }
    void validate() const;
};

struct StepState {
    int n = 0;
    FieldCoefficients u; ///< u_h^n
    FieldCoefficients r; ///< r_h^n
    FieldCoefficients p; ///< p_h^n = r_h^n + xi/k (xi of the realized increment)
    Eigen::VectorXd pressure_time_integral_r; ///< k sum r_h^m
    Eigen::VectorXd pressure_time_integral_p; ///< k sum p_h^m
};

struct StepDiagnostics {
    double u_l2 = 0.0;
    double grad_u_l2 = 0.0;
    double u_h2_broken = 0.0;
    double energy_residual = 0.0;    ///< relative defect of the per-step energy identity
    double divergence_max = 0.0;     ///< max_q |d(u_h^n, psi_q)|
    double pressure_mean_r = 0.0;
    double pressure_mean_p = 0.0;
    double helmholtz_residual = 0.0; ///< relative residual of the Step I solve
    int picard_iterations = 0;
    bool used_fallback = false;
};

struct PathSummary {
    int n_steps = 0;
    std::vector<double> u_l2_history;
    std::vector<double> grad_u_l2_history;
    double max_u_l2 = 0.0;
    double max_grad_u_l2 = 0.0;
    double max_u_h2_broken = 0.0;
    double max_energy_residual = 0.0;
    double max_divergence = 0.0;
    double max_pressure_mean = 0.0;
    double max_helmholtz_residual = 0.0;
    double initial_divergence = 0.0; ///< Pi_h is not divergence-preserving; reported
    long total_picard_iterations = 0;
    int fallback_steps = 0;
    StepState final_state;

    void record(const StepDiagnostics& diag);
};

using StepObserver = std::function<void(const StepState&, const StepDiagnostics&)>;

/// One (mesh, k) instantiation of the scheme: meshes, dof maps, assembled
/// operators and the shared factorizations. Everything assembled here is
/// immutable during stepping; advance() uses per-instance scratch, so use
/// one Stepper per worker thread.
class Stepper {
public:
    explicit Stepper(const SchemeConfig& config);

    const SchemeConfig& config() const { return cfg_; }
    const MeshTopology& mesh() const { return mesh_; }
    const DofMap& velocity_map() const { return vmap_; }
    const DofMap& pressure_map() const { return pmap_; }
    const DofMap& potential_map() const { return smap_; }
    const AssemblyContext& context() const { return ctx_; }
    const SparseOperator& velocity_mass() const { return mass_v_; }
    const SparseOperator& velocity_stiffness() const { return stiff_v_; }
    const SparseOperator& divergence() const { return div_; }

    StepState initial_state(const AnalyticField& u0) const;
    StepState zero_state() const;

    /// Advance state from step n to n+1 consuming the path's increment at
    /// the stepper's coarsening level (path fine steps / n_steps).
    StepDiagnostics advance(StepState& state, const WienerPath& path);

    PathSummary run_path(const WienerPath& path, const StepObserver& observer = {});

    double norm_l2(const Eigen::VectorXd& u) const;
    double norm_h1semi(const Eigen::VectorXd& u) const;

private:
    struct NonlinearResult {
        int iterations = 0;
        bool used_fallback = false;
        double residual = 0.0;
    };
    NonlinearResult solve_step_system(const Eigen::VectorXd& rhs_u, Eigen::VectorXd& u,
                                      Eigen::VectorXd& r, int step_index);

    SchemeConfig cfg_;
    MeshTopology mesh_;
    DofMap vmap_, pmap_, smap_;
    AssemblyContext ctx_;
    SparseOperator mass_v_, stiff_v_, div_;
    SparseOperator a0_; ///< mass + k nu stiffness (convection-free A block)
    Eigen::VectorXd mean_p_;
    std::unique_ptr<SaddleFactor> stokes_;
    std::unique_ptr<HelmholtzSolver> helmholtz_;
    std::unique_ptr<ModeTable> modes_;
    Eigen::VectorXd body_load_;

    // scratch
    Eigen::VectorXd dw_qp_[2];
    std::vector<double> gdw_qp_; // 2 * n_points, component-major pairs
    Eigen::VectorXd helm_rhs_, xi_, noise_load_, rhs_u_;
    Eigen::VectorXd nvec_a_, nvec_b_, u_iter_, r_iter_;
};

/// Per-path trajectory statistics feeding the sample-set indicators. The
/// reference entries come from a finer coupled run when one exists; absent
/// a reference, the run's own statistics are substituted.
struct TrajectoryStats {
    double max_grad4_ref = 0.0;       ///< max_n ||grad u^n||^4
    double max_u2_h = 0.0;            ///< max_n ||u_h^n||^2
    double max_grad4_h = 0.0;         ///< max_n ||grad u_h^n||^4
    double max_hess4_ref = 0.0;       ///< max_n |u^n|_{H2,broken}^4 (surrogate for ||A u^n||^4)
    double max_diff_l2_sq = 0.0;      ///< max_n ||u^n - u_h^n||^2 (coupled runs)
    double max_grad_diff_l2_sq = 0.0; ///< max_n ||grad(u^n - u_h^n)||^2
};

TrajectoryStats make_trajectory_stats(const PathSummary& run, const PathSummary* reference,
                                      double max_diff_l2_sq, double max_grad_diff_l2_sq);

/// Membership fractions of the paper's sample sets (Omega_k^eps, Omega_h^eps,
/// Omega_{h,h}^eps, Omega_{k,h}^eps, Omega_{kappa0}, Omega_kappa).
struct IndicatorFractions {
    double omega_k = 0.0;
    double omega_h = 0.0;
    double omega_hh = 0.0;
    double omega_kh = 0.0;
    double omega_kappa0 = 0.0;
    double omega_kappa = 0.0;
};

IndicatorFractions indicator_diagnostics(std::span<const TrajectoryStats> summaries,
                                         double epsilon, double kappa0, double kappa,
                                         double h, double k);

} // namespace snsfem
