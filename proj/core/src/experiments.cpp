#include "snsfem/experiments.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "snsfem/error.hpp"
#include "snsfem/linsolve.hpp"

namespace snsfem {

namespace {

// Run fn(path_index) over all paths with n_threads workers, each worker
// owning whatever state the factory builds. Per-path solver failures are the
// caller's business (fn records them); anything escaping fn aborts the study.
template <typename WorkerFactory>
void run_paths_parallel(int n_paths, int n_threads, WorkerFactory&& factory) {
    n_threads = std::max(1, n_threads);
    if (n_threads == 1 || n_paths <= 1) {
        auto fn = factory();
        for (int p = 0; p < n_paths; ++p) fn(p);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            try {
                auto fn = factory();
                while (true) {
                    const int p = next.fetch_add(1);
                    if (p >= n_paths) break;
                    fn(p);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct PathTriple {
    double eau2 = 0.0, ebu2 = 0.0, ep2 = 0.0;
    bool ok = false;
};

LevelEstimate reduce_level(double level, const std::vector<PathTriple>& triples) {
    LevelEstimate row;
    row.level = level;
    double sum[3] = {0.0, 0.0, 0.0};
    int n_ok = 0;
    for (const PathTriple& t : triples) {
        if (!t.ok) continue;
        sum[0] += t.eau2;
        sum[1] += t.ebu2;
        sum[2] += t.ep2;
        ++n_ok;
    }
    row.n_paths_ok = n_ok;
    if (n_ok == 0) return row;
    const double mean[3] = {sum[0] / n_ok, sum[1] / n_ok, sum[2] / n_ok};
    double var[3] = {0.0, 0.0, 0.0};
    for (const PathTriple& t : triples) {
        if (!t.ok) continue;
        var[0] += (t.eau2 - mean[0]) * (t.eau2 - mean[0]);
        var[1] += (t.ebu2 - mean[1]) * (t.ebu2 - mean[1]);
        var[2] += (t.ep2 - mean[2]) * (t.ep2 - mean[2]);
    }
    const double denom = n_ok > 1 ? n_ok - 1.0 : 1.0;
    row.eau = std::sqrt(std::max(0.0, mean[0]));
    row.ebu = std::sqrt(std::max(0.0, mean[1]));
    row.ep = std::sqrt(std::max(0.0, mean[2]));
    row.se_eau = std::sqrt(var[0] / denom / n_ok);
    row.se_ebu = std::sqrt(var[1] / denom / n_ok);
    row.se_ep = std::sqrt(var[2] / denom / n_ok);
    return row;
}

double pressure_l2(const Stepper& st, const Eigen::VectorXd& coeffs) {
    FieldCoefficients wrap;
    wrap.space = SpaceKind::PressureP1ZeroMean;
    wrap.values = coeffs;
    return compute_norm(st.mesh(), st.pressure_map(), wrap, NormKind::L2);
}

void check_failure_budget(int failures, long total_runs) {
    if (failures > 0 && static_cast<double>(failures) > 0.01 * static_cast<double>(total_runs)) {
        throw std::runtime_error("convergence study aborted: path failure rate above 1% (" +
                                 std::to_string(failures) + "/" + std::to_string(total_runs) + ")");
    }
}

} // namespace

FieldCoefficients prolong(const MeshTopology& coarse_mesh, const DofMap& coarse_map,
                          const FieldCoefficients& coarse_field,
                          const MeshTopology& fine_mesh, const DofMap& fine_map) {
    SNSFEM_REQUIRE(coarse_field.space == coarse_map.space, "prolong: field/map space mismatch");
    SNSFEM_REQUIRE(coarse_map.space == fine_map.space, "prolong: space kinds must match");
    SNSFEM_REQUIRE(fine_mesh.n_side() == 2 * coarse_mesh.n_side(),
                   "prolong: fine mesh must be the uniform refinement of the coarse");
    SNSFEM_REQUIRE(std::abs(fine_mesh.period_L() - coarse_mesh.period_L()) == 0.0,
                   "prolong: periods differ");

    const std::vector<Vec2> positions = dof_positions(fine_mesh, fine_map);
    FieldCoefficients out;
    out.space = fine_map.space;
    out.values.resize(fine_map.n_global());
    for (int g = 0; g < fine_map.n_scalar; ++g) {
        const Eigen::Vector2d val =
            evaluate_field(coarse_mesh, coarse_map, coarse_field, positions[static_cast<std::size_t>(g)]);
        for (int c = 0; c < fine_map.n_components; ++c) {
            out.values[fine_map.global_dof(c, g)] = val[c];
        }
    }
    return out;
}

CoupledTimeStats run_coupled_time_pair(Stepper& coarse, Stepper& fine, const WienerPath& path) {
    SNSFEM_REQUIRE(coarse.config().n_side == fine.config().n_side,
                   "coupled time pair: meshes must agree");
    SNSFEM_REQUIRE(fine.config().n_steps == 2 * coarse.config().n_steps,
                   "coupled time pair: fine run must halve the step size");

    CoupledTimeStats out;
    StepState sc = coarse.zero_state();
    StepState sf = fine.zero_state();
    out.coarse.n_steps = coarse.config().n_steps;
    out.fine.n_steps = fine.config().n_steps;

    Eigen::VectorXd du;
    for (int n = 0; n < coarse.config().n_steps; ++n) {
        out.fine.record(fine.advance(sf, path));
        out.fine.record(fine.advance(sf, path));
        out.coarse.record(coarse.advance(sc, path));
        du = sc.u.values - sf.u.values;
        const double d2 = coarse.norm_l2(du);
        const double g2 = coarse.norm_h1semi(du);
        out.max_diff_l2_sq = std::max(out.max_diff_l2_sq, d2 * d2);
        out.max_grad_diff_l2_sq = std::max(out.max_grad_diff_l2_sq, g2 * g2);
        if (n + 1 == coarse.config().n_steps) {
            out.final_diff_l2_sq = d2 * d2;
            out.final_diff_h1_sq = g2 * g2;
        }
    }
    const double ep = pressure_l2(coarse, sc.pressure_time_integral_p - sf.pressure_time_integral_p);
    out.pressure_integral_diff_l2_sq = ep * ep;
    out.coarse.final_state = std::move(sc);
    out.fine.final_state = std::move(sf);
    return out;
}

CoupledSpaceStats run_coupled_space_pair(Stepper& coarse, Stepper& fine, const WienerPath& path) {
    SNSFEM_REQUIRE(fine.config().n_side == 2 * coarse.config().n_side,
                   "coupled space pair: fine mesh must refine the coarse");
    SNSFEM_REQUIRE(coarse.config().n_steps == fine.config().n_steps,
                   "coupled space pair: step counts must agree");

    CoupledSpaceStats out;
    out.coarse = coarse.run_path(path);
    out.fine = fine.run_path(path);

    const FieldCoefficients u_up =
        prolong(coarse.mesh(), coarse.velocity_map(), out.coarse.final_state.u, fine.mesh(),
                fine.velocity_map());
    const Eigen::VectorXd du = u_up.values - out.fine.final_state.u.values;
    const double d2 = fine.norm_l2(du);
    const double g2 = fine.norm_h1semi(du);
    out.final_diff_l2_sq = d2 * d2;
    out.final_diff_h1_sq = g2 * g2;

    FieldCoefficients ip;
    ip.space = SpaceKind::PressureP1ZeroMean;
    ip.values = out.coarse.final_state.pressure_time_integral_p;
    const FieldCoefficients ip_up =
        prolong(coarse.mesh(), coarse.pressure_map(), ip, fine.mesh(), fine.pressure_map());
    const double ep =
        pressure_l2(fine, ip_up.values - out.fine.final_state.pressure_time_integral_p);
    out.pressure_integral_diff_l2_sq = ep * ep;
    return out;
}

ErrorTable time_convergence_study(const SchemeConfig& base, const std::vector<int>& n_steps_levels,
                                  int n_paths, std::uint64_t master_seed, int n_threads) {
    base.validate();
    SNSFEM_REQUIRE(!n_steps_levels.empty(), "time study: no levels");
    SNSFEM_REQUIRE(n_paths >= 1, "time study: n_paths must be >= 1");
    int n_max = 0;
    for (int n : n_steps_levels) {
        SNSFEM_REQUIRE(n >= 1, "time study: level step counts must be >= 1");
        n_max = std::max(n_max, n);
    }
    for (int n : n_steps_levels) {
        SNSFEM_REQUIRE(n_max % n == 0, "time study: every k level must divide the finest");
    }
    const int n_fine = 2 * n_max; // the k/2 companion of the finest level
    const double dt_fine = base.T / n_fine;

    ErrorTable table;
    table.axis = ErrorTable::Axis::Time;
    table.n_paths = n_paths;
    table.master_seed = master_seed;

    for (int n_steps : n_steps_levels) {
        SchemeConfig cfg_c = base;
        cfg_c.n_steps = n_steps;
        SchemeConfig cfg_f = base;
        cfg_f.n_steps = 2 * n_steps;

        std::vector<PathTriple> triples(static_cast<std::size_t>(n_paths));
        run_paths_parallel(n_paths, n_threads, [&]() {
            auto coarse = std::make_shared<Stepper>(cfg_c);
            auto fine = std::make_shared<Stepper>(cfg_f);
            return [&, coarse, fine](int p) {
                const WienerPath path(master_seed, static_cast<std::uint64_t>(p), n_fine, dt_fine);
                PathTriple& out = triples[static_cast<std::size_t>(p)];
                try {
                    const CoupledTimeStats stats = run_coupled_time_pair(*coarse, *fine, path);
                    out.eau2 = stats.final_diff_l2_sq;
                    out.ebu2 = stats.final_diff_h1_sq;
                    out.ep2 = stats.pressure_integral_diff_l2_sq;
                    out.ok = true;
                } catch (const PicardError&) {
                    out.ok = false;
                } catch (const SolveError&) {
                    out.ok = false;
                }
            };
        });
        table.rows.push_back(reduce_level(base.T / n_steps, triples));
        table.failed_paths += n_paths - table.rows.back().n_paths_ok;
    }
    check_failure_budget(table.failed_paths,
                         static_cast<long>(n_paths) * static_cast<long>(n_steps_levels.size()));
    return table;
}

ErrorTable space_convergence_study(const SchemeConfig& base, const std::vector<int>& n_side_levels,
                                   int n_paths, std::uint64_t master_seed, int n_threads) {
    base.validate();
    SNSFEM_REQUIRE(!n_side_levels.empty(), "space study: no levels");
    SNSFEM_REQUIRE(n_paths >= 1, "space study: n_paths must be >= 1");
    for (std::size_t i = 0; i < n_side_levels.size(); ++i) {
        SNSFEM_REQUIRE(n_side_levels[i] >= 2, "space study: n_side must be >= 2");
        for (std::size_t j = i + 1; j < n_side_levels.size(); ++j) {
            const int a = std::min(n_side_levels[i], n_side_levels[j]);
            const int b = std::max(n_side_levels[i], n_side_levels[j]);
            SNSFEM_REQUIRE(b % a == 0 && (b / a & (b / a - 1)) == 0,
                           "space study: h levels must be nested (power-of-two ratios)");
        }
    }
    const int n_fine_steps = base.n_steps;
    const double dt_fine = base.T / n_fine_steps;

    ErrorTable table;
    table.axis = ErrorTable::Axis::Space;
    table.n_paths = n_paths;
    table.master_seed = master_seed;

    for (int n_side : n_side_levels) {
        SchemeConfig cfg_c = base;
        cfg_c.n_side = n_side;
        SchemeConfig cfg_f = base;
        cfg_f.n_side = 2 * n_side;

        std::vector<PathTriple> triples(static_cast<std::size_t>(n_paths));
        run_paths_parallel(n_paths, n_threads, [&]() {
            auto coarse = std::make_shared<Stepper>(cfg_c);
            auto fine = std::make_shared<Stepper>(cfg_f);
            return [&, coarse, fine](int p) {
                const WienerPath path(master_seed, static_cast<std::uint64_t>(p), n_fine_steps,
                                      dt_fine);
                PathTriple& out = triples[static_cast<std::size_t>(p)];
                try {
                    const CoupledSpaceStats stats = run_coupled_space_pair(*coarse, *fine, path);
                    out.eau2 = stats.final_diff_l2_sq;
                    out.ebu2 = stats.final_diff_h1_sq;
                    out.ep2 = stats.pressure_integral_diff_l2_sq;
                    out.ok = true;
                } catch (const PicardError&) {
                    out.ok = false;
                } catch (const SolveError&) {
                    out.ok = false;
                }
            };
        });
        const double h = std::sqrt(2.0) * base.noise.period_L / n_side;
        table.rows.push_back(reduce_level(h, triples));
        table.failed_paths += n_paths - table.rows.back().n_paths_ok;
    }
    check_failure_budget(table.failed_paths,
                         static_cast<long>(n_paths) * static_cast<long>(n_side_levels.size()));
    return table;
}

RateFit fit_loglog(const std::vector<double>& levels, const std::vector<double>& values) {
    RateFit fit;
    if (levels.size() < 3 || levels.size() != values.size()) {
        fit.note = "needs at least 3 levels";
        return fit;
    }
    for (double v : values) {
        if (!(v > 0.0)) {
            fit.note = "nonpositive estimate; estimator skipped";
            return fit;
        }
    }
    const std::size_t n = levels.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(levels[i]);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) {
        fit.note = "degenerate level spacing";
        return fit;
    }
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::log(values[i]) - (fit.slope * std::log(levels[i]) + fit.intercept);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    fit.valid = true;
    return fit;
}

RateFits fit_rate(const ErrorTable& table) {
    std::vector<double> levels, eau, ebu, ep;
    for (const LevelEstimate& row : table.rows) {
        levels.push_back(row.level);
        eau.push_back(row.eau);
        ebu.push_back(row.ebu);
        ep.push_back(row.ep);
    }
    RateFits fits;
    fits.eau = fit_loglog(levels, eau);
    fits.ebu = fit_loglog(levels, ebu);
    fits.ep = fit_loglog(levels, ep);
    return fits;
}

AnalyticField ManufacturedTaylorGreen::velocity() const {
    const double a = 2.0 * M_PI;
    const double px = phase_x, py = phase_y;
    AnalyticField f;
    f.value = [a, px, py](Vec2 x, std::span<double> out) {
        out[0] = std::sin(a * x[0] + px) * std::cos(a * x[1] + py);
        out[1] = -std::cos(a * x[0] + px) * std::sin(a * x[1] + py);
    };
    f.gradient = [a, px, py](Vec2 x, std::span<Vec2> out) {
        const double sx = std::sin(a * x[0] + px), cx = std::cos(a * x[0] + px);
        const double sy = std::sin(a * x[1] + py), cy = std::cos(a * x[1] + py);
        out[0] = Vec2{a * cx * cy, -a * sx * sy};
        out[1] = Vec2{a * sx * sy, -a * cx * cy};
    };
    return f;
}

AnalyticField ManufacturedTaylorGreen::pressure() const {
    const double a = 2.0 * M_PI;
    const double px = phase_x, py = phase_y;
    AnalyticField f;
    f.value = [a, px, py](Vec2 x, std::span<double> out) {
        out[0] = 0.25 * (std::cos(2.0 * (a * x[0] + px)) + std::cos(2.0 * (a * x[1] + py)));
    };
    f.gradient = [a, px, py](Vec2 x, std::span<Vec2> out) {
        out[0] = Vec2{-0.5 * a * std::sin(2.0 * (a * x[0] + px)),
                      -0.5 * a * std::sin(2.0 * (a * x[1] + py))};
    };
    return f;
}

AnalyticField ManufacturedTaylorGreen::forcing() const {
    // The convection term of this vortex is a pure gradient and cancels
    // against the pressure, leaving f = -nu Lap u = 8 pi^2 nu u.
    const double a = 2.0 * M_PI;
    const double scale = 2.0 * a * a * nu;
    const AnalyticField vel = velocity();
    AnalyticField f;
    f.value = [vel, scale](Vec2 x, std::span<double> out) {
        vel.value(x, out);
        out[0] *= scale;
        out[1] *= scale;
    };
    return f;
}

namespace {

// Steady solve of nu a(u,v) + b(u,u,v) - d(v,p) = (f,v), d(u,q) = 0 with
// zero-mean pins on the pressure and on both velocity components (the torus
// otherwise leaves the velocity mean free).
struct SteadySolution {
    Eigen::VectorXd u, p;
};

SteadySolution solve_steady_manufactured(const MeshTopology& mesh, const DofMap& vmap,
                                         const DofMap& pmap, const ManufacturedTaylorGreen& mms,
                                         double picard_tol, int picard_max) {
    const SparseOperator stiff = assemble_stiffness(mesh, vmap);
    const SparseOperator div = assemble_divergence(mesh, vmap, pmap);
    const Eigen::VectorXd mean_p = mean_vector(mesh, pmap);
    const Eigen::VectorXd mean_v = mean_vector(mesh, vmap);
    const Eigen::VectorXd force = assemble_load(mesh, vmap, mms.forcing(), 10);
    AssemblyContext ctx(mesh, 6);

    const int n_u = vmap.n_global();
    const int n_p = pmap.n_global();
    const int stride = vmap.component_stride;
    const int n = n_u + n_p + 3; // pressure mean + two velocity means

    FieldCoefficients w = zero_field(vmap);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs.head(n_u) = force;

    SteadySolution sol;
    const double f_norm = force.norm();
    Eigen::VectorXd nvec;
    for (int it = 1; it <= picard_max; ++it) {
        const SparseOperator n1s = trilinear_n1_scalar(ctx, vmap, w);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(stiff.nonZeros()) +
                      2 * static_cast<std::size_t>(n1s.nonZeros()) +
                      2 * static_cast<std::size_t>(div.nonZeros()) + 4 * static_cast<std::size_t>(n_u));
        for (int i = 0; i < stiff.outerSize(); ++i) {
            for (SparseOperator::InnerIterator itr(stiff, i); itr; ++itr) {
                trips.emplace_back(static_cast<int>(itr.row()), static_cast<int>(itr.col()),
                                   mms.nu * itr.value());
            }
        }
        for (int i = 0; i < n1s.outerSize(); ++i) {
            for (SparseOperator::InnerIterator itr(n1s, i); itr; ++itr) {
                trips.emplace_back(static_cast<int>(itr.row()), static_cast<int>(itr.col()), itr.value());
                trips.emplace_back(stride + static_cast<int>(itr.row()),
                                   stride + static_cast<int>(itr.col()), itr.value());
            }
        }
        for (int i = 0; i < div.outerSize(); ++i) {
            for (SparseOperator::InnerIterator itr(div, i); itr; ++itr) {
                const int p = static_cast<int>(itr.row());
                const int v = static_cast<int>(itr.col());
                trips.emplace_back(n_u + p, v, itr.value());
                trips.emplace_back(v, n_u + p, -itr.value());
            }
        }
        for (int p = 0; p < n_p; ++p) {
            trips.emplace_back(n_u + p, n_u + n_p, mean_p[p]);
            trips.emplace_back(n_u + n_p, n_u + p, mean_p[p]);
        }
        for (int c = 0; c < 2; ++c) {
            for (int g = 0; g < stride; ++g) {
                const int dof = c * stride + g;
                trips.emplace_back(dof, n_u + n_p + 1 + c, mean_v[dof]);
                trips.emplace_back(n_u + n_p + 1 + c, dof, mean_v[dof]);
            }
        }
        SparseOperator grand(n, n);
        grand.setFromTriplets(trips.begin(), trips.end());
        SparseFactor factor(grand, "steady saddle system");
        const Eigen::VectorXd x = factor.solve_unchecked(rhs);
        sol.u = x.head(n_u);
        sol.p = x.segment(n_u, n_p);

        apply_trilinear(ctx, vmap, sol.u, sol.u, nvec);
        Eigen::VectorXd momentum =
            mms.nu * (stiff * sol.u) + nvec - div.transpose() * sol.p - force;
        const double lam_x = x[n_u + n_p + 1];
        const double lam_y = x[n_u + n_p + 2];
        for (int g = 0; g < stride; ++g) {
            momentum[g] += lam_x * mean_v[g];
            momentum[stride + g] += lam_y * mean_v[stride + g];
        }
        const double res = momentum.norm();
        if (res <= picard_tol * f_norm) return sol;
        w.values = sol.u;
    }
    throw PicardError("steady manufactured solve did not converge", 0, -1.0);
}

} // namespace

DeterministicVerifyReport deterministic_verify(double nu, const std::vector<int>& n_sides,
                                               double picard_tol) {
    SNSFEM_REQUIRE(n_sides.size() >= 3, "deterministic_verify: need at least 3 mesh levels");
    ManufacturedTaylorGreen mms;
    mms.nu = nu;

    DeterministicVerifyReport report;
    std::vector<double> hs, eu, egu, ep;
    for (int n : n_sides) {
        const MeshTopology mesh = build_periodic_uniform_mesh(n, 1.0);
        const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
        const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);
        const SteadySolution sol = solve_steady_manufactured(mesh, vmap, pmap, mms, picard_tol, 50);

        FieldCoefficients uf;
        uf.space = SpaceKind::VelocityP2Vector;
        uf.values = sol.u;
        FieldCoefficients pf;
        pf.space = SpaceKind::PressureP1ZeroMean;
        pf.values = sol.p;

        DeterministicLevel lvl;
        lvl.n_side = n;
        lvl.err_u_l2 = error_norm(mesh, vmap, uf, mms.velocity(), NormKind::L2, 10);
        lvl.err_u_h1 = error_norm(mesh, vmap, uf, mms.velocity(), NormKind::H1Seminorm, 10);
        lvl.err_p_l2 = error_norm(mesh, pmap, pf, mms.pressure(), NormKind::L2, 10);
        report.levels.push_back(lvl);

        hs.push_back(mesh.h());
        eu.push_back(lvl.err_u_l2);
        egu.push_back(lvl.err_u_h1);
        ep.push_back(lvl.err_p_l2);
    }
    report.order_u_l2 = fit_loglog(hs, eu);
    report.order_u_h1 = fit_loglog(hs, egu);
    report.order_p_l2 = fit_loglog(hs, ep);
    report.within_bands = report.order_u_l2.valid && report.order_u_h1.valid &&
                          report.order_p_l2.valid &&
                          std::abs(report.order_u_l2.slope - 3.0) <= 0.2 &&
                          std::abs(report.order_u_h1.slope - 2.0) <= 0.2 &&
                          std::abs(report.order_p_l2.slope - 2.0) <= 0.3;
    return report;
}

double inf_sup_constant(const MeshTopology& mesh, const DofMap& velocity,
                        const DofMap& pressure) {
    const SparseOperator stiff = assemble_stiffness(mesh, velocity);
    const SparseOperator div = assemble_divergence(mesh, velocity, pressure);
    const Eigen::VectorXd mean_v = mean_vector(mesh, velocity);
    const int n_u = velocity.n_global();
    const int n_p = pressure.n_global();
    const int stride = velocity.component_stride;

    // Pin the per-component constants of the velocity Laplacian.
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < stiff.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(stiff, i); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    for (int c = 0; c < 2; ++c) {
        for (int g = 0; g < stride; ++g) {
            const int dof = c * stride + g;
            trips.emplace_back(dof, n_u + c, mean_v[dof]);
            trips.emplace_back(n_u + c, dof, mean_v[dof]);
        }
    }
    SparseOperator pinned(n_u + 2, n_u + 2);
    pinned.setFromTriplets(trips.begin(), trips.end());
    SparseFactor factor(pinned, "pinned velocity stiffness");

    Eigen::MatrixXd schur(n_p, n_p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_u + 2);
    for (int j = 0; j < n_p; ++j) {
        rhs.setZero();
        for (SparseOperator::InnerIterator it(div, j); it; ++it) {
            rhs[it.col()] = it.value();
        }
        const Eigen::VectorXd x = factor.solve_unchecked(rhs);
        schur.col(j) = div * x.head(n_u);
    }
    schur = 0.5 * (schur + schur.transpose()).eval();

    const SparseOperator mass_p_sparse = assemble_mass(mesh, pressure);
    const Eigen::MatrixXd mass_p = Eigen::MatrixXd(mass_p_sparse);

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(schur, mass_p);
    SNSFEM_REQUIRE(eig.info() == Eigen::Success, "inf_sup_constant: eigensolver failed");
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double cutoff = 1e-8 * std::max(1.0, vals[vals.size() - 1]);
    for (int i = 0; i < vals.size(); ++i) {
        if (vals[i] > cutoff) return std::sqrt(vals[i]);
    }
    return 0.0;
}

MomentStabilityReport moment_stability_probe(const SchemeConfig& base, int n_paths,
                                             std::uint64_t master_seed, int n_threads) {
    base.validate();
    SchemeConfig href = base;
    href.n_side *= 2;
    SchemeConfig kref = base;
    kref.n_steps *= 2;

    const int n_fine = 2 * base.n_steps;
    const double dt_fine = base.T / n_fine;

    std::vector<std::array<double, 3>> maxima(static_cast<std::size_t>(n_paths));
    run_paths_parallel(n_paths, n_threads, [&]() {
        auto s0 = std::make_shared<Stepper>(base);
        auto sh = std::make_shared<Stepper>(href);
        auto sk = std::make_shared<Stepper>(kref);
        return [&, s0, sh, sk](int p) {
            const WienerPath path(master_seed, static_cast<std::uint64_t>(p), n_fine, dt_fine);
            auto& out = maxima[static_cast<std::size_t>(p)];
            out[0] = std::pow(s0->run_path(path).max_u_l2, 2);
            out[1] = std::pow(sh->run_path(path).max_u_l2, 2);
            out[2] = std::pow(sk->run_path(path).max_u_l2, 2);
        };
    });

    MomentStabilityReport report;
    report.n_paths = n_paths;
    for (const auto& m : maxima) {
        report.base += m[0];
        report.h_refined += m[1];
        report.k_refined += m[2];
    }
    report.base /= n_paths;
    report.h_refined /= n_paths;
    report.k_refined /= n_paths;
    return report;
}

IndicatorStudyResult indicator_study(const SchemeConfig& base, int n_paths,
                                     std::uint64_t master_seed, double epsilon, double kappa0,
                                     double kappa, int n_threads) {
    base.validate();
    SchemeConfig fine_cfg = base;
    fine_cfg.n_steps *= 2;
    const int n_fine = fine_cfg.n_steps;
    const double dt_fine = base.T / n_fine;

    std::vector<TrajectoryStats> stats(static_cast<std::size_t>(n_paths));
    run_paths_parallel(n_paths, n_threads, [&]() {
        auto coarse = std::make_shared<Stepper>(base);
        auto fine = std::make_shared<Stepper>(fine_cfg);
        return [&, coarse, fine](int p) {
            const WienerPath path(master_seed, static_cast<std::uint64_t>(p), n_fine, dt_fine);
            const CoupledTimeStats pair = run_coupled_time_pair(*coarse, *fine, path);
            stats[static_cast<std::size_t>(p)] = make_trajectory_stats(
                pair.coarse, &pair.fine, pair.max_diff_l2_sq, pair.max_grad_diff_l2_sq);
        };
    });

    IndicatorStudyResult result;
    result.n_paths = n_paths;
    result.h = std::sqrt(2.0) * base.noise.period_L / base.n_side;
    result.k = base.dt();
    result.fractions = indicator_diagnostics(stats, epsilon, kappa0, kappa, result.h, result.k);
    return result;
}

} // namespace snsfem
