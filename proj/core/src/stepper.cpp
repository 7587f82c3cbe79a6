#include "snsfem/stepper.hpp"

#include <cmath>
#include <limits>

#include "snsfem/error.hpp"

namespace snsfem {

void SchemeConfig::validate() const {
    SNSFEM_REQUIRE(nu > 0.0, "SchemeConfig: nu must be positive");
    SNSFEM_REQUIRE(T > 0.0, "SchemeConfig: T must be positive");
    SNSFEM_REQUIRE(n_steps >= 1, "SchemeConfig: n_steps must be >= 1");
    SNSFEM_REQUIRE(n_side >= 2, "SchemeConfig: n_side must be >= 2");
    SNSFEM_REQUIRE(picard_tol > 0.0 && picard_tol < 1.0, "SchemeConfig: picard_tol in (0,1)");
    SNSFEM_REQUIRE(linear_tol > 0.0 && linear_tol < 1.0, "SchemeConfig: linear_tol in (0,1)");
    SNSFEM_REQUIRE(picard_max >= 1, "SchemeConfig: picard_max must be >= 1");
    SNSFEM_REQUIRE(quad_degree >= 1 && quad_degree <= 10, "SchemeConfig: quad_degree in 1..10");
    SNSFEM_REQUIRE(observer_stride >= 1, "SchemeConfig: observer_stride must be >= 1");
    SNSFEM_REQUIRE(noise.modes_per_axis >= 1, "SchemeConfig: noise modes must be >= 1");
    SNSFEM_REQUIRE(noise.period_L > 0.0, "SchemeConfig: noise period must be positive");
}

Stepper::Stepper(const SchemeConfig& config)
    : cfg_(config), mesh_(build_periodic_uniform_mesh(config.n_side, config.noise.period_L)),
      vmap_(build_dof_map(mesh_, SpaceKind::VelocityP2Vector)),
      pmap_(build_dof_map(mesh_, SpaceKind::PressureP1ZeroMean)),
      smap_(build_dof_map(mesh_, SpaceKind::PotentialP1Scalar)),
      ctx_(mesh_, config.quad_degree) {
    cfg_.validate();
    mass_v_ = assemble_mass(mesh_, vmap_);
    stiff_v_ = assemble_stiffness(mesh_, vmap_);
    div_ = assemble_divergence(mesh_, vmap_, pmap_);
    mean_p_ = mean_vector(mesh_, pmap_);

    const double k = cfg_.dt();
    a0_ = mass_v_ + (k * cfg_.nu) * stiff_v_;
    stokes_ = std::make_unique<SaddleFactor>(a0_, div_, mean_p_, k);
    helmholtz_ = std::make_unique<HelmholtzSolver>(ctx_, smap_);
    modes_ = std::make_unique<ModeTable>(ctx_, cfg_.noise);
    body_load_ = assemble_load(mesh_, vmap_, constant_field(cfg_.body_force), 2);
    gdw_qp_.resize(2 * static_cast<std::size_t>(modes_->n_points()));
}

StepState Stepper::zero_state() const {
    StepState s;
    s.u = zero_field(vmap_);
    s.r = zero_field(pmap_);
    s.p = zero_field(pmap_);
    s.pressure_time_integral_r = Eigen::VectorXd::Zero(pmap_.n_global());
    s.pressure_time_integral_p = Eigen::VectorXd::Zero(pmap_.n_global());
    return s;
}

StepState Stepper::initial_state(const AnalyticField& u0) const {
    StepState s = zero_state();
    s.u = l2_project(mesh_, vmap_, u0, cfg_.quad_degree, cfg_.linear_tol);
    return s;
}

double Stepper::norm_l2(const Eigen::VectorXd& u) const {
    return std::sqrt(std::max(0.0, u.dot(mass_v_ * u)));
}

double Stepper::norm_h1semi(const Eigen::VectorXd& u) const {
    return std::sqrt(std::max(0.0, u.dot(stiff_v_ * u)));
}

Stepper::NonlinearResult Stepper::solve_step_system(const Eigen::VectorXd& rhs_u,
                                                    Eigen::VectorXd& u, Eigen::VectorXd& r,
                                                    int step_index) {
    const double k = cfg_.dt();
    const double rhs_norm = rhs_u.norm();
    const double tol = cfg_.picard_tol * rhs_norm;

    NonlinearResult result;

    if (cfg_.nonlinear == NonlinearStrategy::LaggedFixedPoint) {
        u_iter_ = u; // incoming guess (previous step's velocity)
        apply_trilinear(ctx_, vmap_, u_iter_, u_iter_, nvec_a_);
        double best = std::numeric_limits<double>::infinity();
        bool diverged = false;
        for (int it = 1; it <= cfg_.picard_max; ++it) {
            stokes_->solve(rhs_u - k * nvec_a_, u, r);
            apply_trilinear(ctx_, vmap_, u, u, nvec_b_);
            const double res = k * (nvec_b_ - nvec_a_).norm();
            result.iterations = it;
            result.residual = res;
            if (res <= tol) {
                return result;
            }
            if (!std::isfinite(res) || res > 1e3 * best) {
                diverged = true;
                break;
            }
            best = std::min(best, res);
            u_iter_.swap(u);
            nvec_a_.swap(nvec_b_);
        }
        result.used_fallback = true;
        (void)diverged;
    }

    // Frozen-field Picard: convection b(w, ., .) inside the matrix,
    // refactorized each iteration.
    FieldCoefficients w;
    w.space = SpaceKind::VelocityP2Vector;
    w.values = result.used_fallback ? u_iter_ : u;
    const int stride = vmap_.component_stride;
    for (int it = 1; it <= cfg_.picard_max; ++it) {
        const SparseOperator n1s = trilinear_n1_scalar(ctx_, vmap_, w);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(a0_.nonZeros()) +
                      2 * static_cast<std::size_t>(n1s.nonZeros()));
        for (int i = 0; i < a0_.outerSize(); ++i) {
            for (SparseOperator::InnerIterator itr(a0_, i); itr; ++itr) {
                trips.emplace_back(static_cast<int>(itr.row()), static_cast<int>(itr.col()),
                                   itr.value());
            }
        }
        for (int i = 0; i < n1s.outerSize(); ++i) {
            for (SparseOperator::InnerIterator itr(n1s, i); itr; ++itr) {
                trips.emplace_back(static_cast<int>(itr.row()), static_cast<int>(itr.col()),
                                   k * itr.value());
                trips.emplace_back(stride + static_cast<int>(itr.row()),
                                   stride + static_cast<int>(itr.col()), k * itr.value());
            }
        }
        SparseOperator a(vmap_.n_global(), vmap_.n_global());
        a.setFromTriplets(trips.begin(), trips.end());
        SaddleFactor factor(a, div_, mean_p_, k);
        factor.solve(rhs_u, u, r);

        apply_trilinear(ctx_, vmap_, u, u, nvec_b_);
        const Eigen::VectorXd momentum =
            a0_ * u + k * nvec_b_ - k * (div_.transpose() * r) - rhs_u;
        const double res = momentum.norm();
        ++result.iterations;
        result.residual = res;
        if (res <= tol) {
            return result;
        }
        w.values = u;
    }
    throw PicardError("Picard iteration did not converge at step " + std::to_string(step_index) +
                          " (residual " + std::to_string(result.residual) + ")",
                      step_index, result.residual);
}

StepDiagnostics Stepper::advance(StepState& state, const WienerPath& path) {
    SNSFEM_REQUIRE(path.n_steps_fine() % cfg_.n_steps == 0,
                   "advance: stepper step count must divide the path's fine lattice");
    const int level = path.n_steps_fine() / cfg_.n_steps;
    const double k = cfg_.dt();
    SNSFEM_REQUIRE(std::abs(level * path.dt_fine() - k) <= 1e-12 * k,
                   "advance: path fine step size inconsistent with scheme dt");
    SNSFEM_REQUIRE(state.n < cfg_.n_steps, "advance: trajectory already complete");

    const int step = state.n; // 0-based increment index
    const int n_pts = modes_->n_points();
    const int nq = ctx_.n_qp();
    const int stride = vmap_.component_stride;

    // Realized noise field G(u^{n-1}) dW at all quadrature points.
    const bool vector_noise = cfg_.noise.vector_valued;
    modes_->eval(path.increment_coeffs(cfg_.noise, level, step, 0), dw_qp_[0]);
    if (vector_noise) {
        modes_->eval(path.increment_coeffs(cfg_.noise, level, step, 1), dw_qp_[1]);
    }
    const Eigen::VectorXd& u_prev = state.u.values;
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
        const auto& dofs = vmap_.cell_dofs[static_cast<std::size_t>(t)];
        for (int q = 0; q < nq; ++q) {
            double uv[2] = {0.0, 0.0};
            for (int a = 0; a < 6; ++a) {
                const double val = ctx_.p2_value(q, a);
                uv[0] += u_prev[dofs[static_cast<std::size_t>(a)]] * val;
                uv[1] += u_prev[stride + dofs[static_cast<std::size_t>(a)]] * val;
            }
            const Vec2 g = cfg_.diffusion.apply(Vec2{uv[0], uv[1]});
            const int pid = t * nq + q;
            const double w0 = dw_qp_[0][pid];
            const double w1 = vector_noise ? dw_qp_[1][pid] : w0;
            gdw_qp_[2 * static_cast<std::size_t>(pid)] = g[0] * w0;
            gdw_qp_[2 * static_cast<std::size_t>(pid) + 1] = g[1] * w1;
        }
    }

    // Step I on the realized increment: (grad xi, grad phi) = (G dW, grad phi).
    // This makes xi dW-inclusive, so Step III is p = r + xi / k.
    const auto gdw_eval = [this](int pid, Vec2) -> Vec2 {
        return Vec2{gdw_qp_[2 * static_cast<std::size_t>(pid)],
                    gdw_qp_[2 * static_cast<std::size_t>(pid) + 1]};
    };
    helm_rhs_ = helmholtz_->assemble_gradient_rhs(gdw_eval);
    xi_ = helmholtz_->solve_potential(helm_rhs_, cfg_.linear_tol);
    const double helm_res = helmholtz_->residual(xi_, helm_rhs_);

    // Noise load (eta dW, v) with eta dW = G dW - grad xi.
    noise_load_.setZero(vmap_.n_global());
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
        const auto& dofs = vmap_.cell_dofs[static_cast<std::size_t>(t)];
        const Vec2 gxi = helmholtz_->element_gradient(xi_, t);
        double acc[2][6] = {};
        for (int q = 0; q < nq; ++q) {
            const int pid = t * nq + q;
            const double e0 = gdw_qp_[2 * static_cast<std::size_t>(pid)] - gxi[0];
            const double e1 = gdw_qp_[2 * static_cast<std::size_t>(pid) + 1] - gxi[1];
            const double scale = ctx_.weight_times_det(q);
            for (int a = 0; a < 6; ++a) {
                const double val = scale * ctx_.p2_value(q, a);
                acc[0][a] += e0 * val;
                acc[1][a] += e1 * val;
            }
        }
        for (int a = 0; a < 6; ++a) {
            noise_load_[dofs[static_cast<std::size_t>(a)]] += acc[0][a];
            noise_load_[stride + dofs[static_cast<std::size_t>(a)]] += acc[1][a];
        }
    }

    rhs_u_ = mass_v_ * u_prev + noise_load_ + k * body_load_;

    // Step II.
    Eigen::VectorXd u = u_prev;
    Eigen::VectorXd r;
    const NonlinearResult nl = solve_step_system(rhs_u_, u, r, state.n + 1);

    // Step III and the time integrals.
    Eigen::VectorXd p = r + xi_ / k;
    state.pressure_time_integral_r += k * r;
    state.pressure_time_integral_p += k * p;

    StepDiagnostics diag;
    diag.picard_iterations = nl.iterations;
    diag.used_fallback = nl.used_fallback;
    diag.helmholtz_residual = helm_res;

    const Eigen::VectorXd mu = mass_v_ * u;
    const Eigen::VectorXd ku = stiff_v_ * u;
    const double a1 = u.dot(mu);
    diag.u_l2 = std::sqrt(std::max(0.0, a1));
    diag.grad_u_l2 = std::sqrt(std::max(0.0, u.dot(ku)));
    {
        FieldCoefficients wrap;
        wrap.space = SpaceKind::VelocityP2Vector;
        wrap.values = u;
        diag.u_h2_broken = broken_h2_seminorm(mesh_, vmap_, wrap);
    }

    // Per-step discrete energy identity (test function v = u^n).
    const Eigen::VectorXd du = u - u_prev;
    const double a0 = u_prev.dot(mass_v_ * u_prev);
    const double ad = du.dot(mass_v_ * du);
    const double visc = k * cfg_.nu * u.dot(ku);
    const double noise_dot = noise_load_.dot(u);
    const double force_dot = k * body_load_.dot(u);
    const double defect = 0.5 * (a1 - a0 + ad) + visc - noise_dot - force_dot;
    const double scale =
        0.5 * (std::abs(a1) + std::abs(a0) + std::abs(ad)) + std::abs(visc) +
        std::abs(noise_dot) + std::abs(force_dot);
    diag.energy_residual = scale > 0.0 ? std::abs(defect) / scale : std::abs(defect);

    diag.divergence_max = (div_ * u).lpNorm<Eigen::Infinity>();
    diag.pressure_mean_r = std::abs(mean_p_.dot(r));
    diag.pressure_mean_p = std::abs(mean_p_.dot(p));

    state.u.values = std::move(u);
    state.r.values = std::move(r);
    state.p.values = std::move(p);
    state.n += 1;
    return diag;
}

void PathSummary::record(const StepDiagnostics& diag) {
    u_l2_history.push_back(diag.u_l2);
    grad_u_l2_history.push_back(diag.grad_u_l2);
    max_u_l2 = std::max(max_u_l2, diag.u_l2);
    max_grad_u_l2 = std::max(max_grad_u_l2, diag.grad_u_l2);
    max_u_h2_broken = std::max(max_u_h2_broken, diag.u_h2_broken);
    max_energy_residual = std::max(max_energy_residual, diag.energy_residual);
    max_divergence = std::max(max_divergence, diag.divergence_max);
    max_pressure_mean = std::max({max_pressure_mean, diag.pressure_mean_r, diag.pressure_mean_p});
    max_helmholtz_residual = std::max(max_helmholtz_residual, diag.helmholtz_residual);
    total_picard_iterations += diag.picard_iterations;
    fallback_steps += diag.used_fallback ? 1 : 0;
}

PathSummary Stepper::run_path(const WienerPath& path, const StepObserver& observer) {
    StepState state = zero_state();
    PathSummary summary;
    summary.n_steps = cfg_.n_steps;
    summary.u_l2_history.reserve(static_cast<std::size_t>(cfg_.n_steps));
    summary.grad_u_l2_history.reserve(static_cast<std::size_t>(cfg_.n_steps));
    summary.initial_divergence = (div_ * state.u.values).lpNorm<Eigen::Infinity>();

    for (int n = 0; n < cfg_.n_steps; ++n) {
        const StepDiagnostics diag = advance(state, path);
        summary.record(diag);
        if (observer && (state.n % cfg_.observer_stride == 0 || state.n == cfg_.n_steps)) {
            observer(state, diag);
        }
    }
    summary.final_state = std::move(state);
    return summary;
}

TrajectoryStats make_trajectory_stats(const PathSummary& run, const PathSummary* reference,
                                      double max_diff_l2_sq, double max_grad_diff_l2_sq) {
    const PathSummary& ref = reference ? *reference : run;
    TrajectoryStats s;
    s.max_grad4_ref = std::pow(ref.max_grad_u_l2, 4);
    s.max_u2_h = run.max_u_l2 * run.max_u_l2;
    s.max_grad4_h = std::pow(run.max_grad_u_l2, 4);
    s.max_hess4_ref = std::pow(ref.max_u_h2_broken, 4);
    s.max_diff_l2_sq = max_diff_l2_sq;
    s.max_grad_diff_l2_sq = max_grad_diff_l2_sq;
    return s;
}

IndicatorFractions indicator_diagnostics(std::span<const TrajectoryStats> summaries,
                                         double epsilon, double kappa0, double kappa,
                                         double h, double k) {
    SNSFEM_REQUIRE(h > 0.0 && k > 0.0, "indicator_diagnostics: h and k must be positive");
    IndicatorFractions f;
    if (summaries.empty()) return f;

    const double bound_k = -epsilon * std::log(k);
    const double bound_h = -epsilon * std::log(h * h + k);
    const double bound_hh = std::pow(h * h + k, -epsilon);
    const double bound_kh = -epsilon * std::log(h * h * h * h + k);
    const double bound_kappa0 =
        kappa0 * (std::pow(h, 2.0 - 2.0 * epsilon) + std::pow(k, 1.0 - 2.0 * epsilon));
    const double bound_kappa =
        kappa * (std::pow(h, 2.0 - 4.0 * epsilon) + std::pow(k, 1.0 - 2.0 * epsilon));

    int n_k = 0, n_h = 0, n_hh = 0, n_kh = 0, n_k0 = 0, n_kp = 0;
    for (const TrajectoryStats& s : summaries) {
        n_k += s.max_grad4_ref <= bound_k;
        n_h += s.max_grad4_ref + s.max_u2_h <= bound_h;
        n_hh += s.max_hess4_ref + s.max_grad4_h <= bound_hh;
        n_kh += s.max_hess4_ref + s.max_grad4_h <= bound_kh;
        n_k0 += s.max_diff_l2_sq <= bound_kappa0;
        n_kp += s.max_grad_diff_l2_sq <= bound_kappa;
    }
    const double n = static_cast<double>(summaries.size());
    f.omega_k = n_k / n;
    f.omega_h = n_h / n;
    f.omega_hh = n_hh / n;
    f.omega_kh = n_kh / n;
    f.omega_kappa0 = n_k0 / n;
    f.omega_kappa = n_kp / n;
    return f;
}

} // namespace snsfem
