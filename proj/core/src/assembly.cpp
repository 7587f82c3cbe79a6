#include "snsfem/assembly.hpp"

#include <vector>

#include "snsfem/error.hpp"
#include "snsfem/linsolve.hpp"

namespace snsfem {

AssemblyContext::AssemblyContext(const MeshTopology& mesh, int quad_degree)
    : mesh_(&mesh), rule_(&quadrature_rule(quad_degree)) {
    const int nq = rule_->size();
    wdet_.resize(static_cast<std::size_t>(nq));
    for (int q = 0; q < nq; ++q) {
        wdet_[static_cast<std::size_t>(q)] = rule_->weights[static_cast<std::size_t>(q)] * mesh.abs_det();
    }

    p2_val_.resize(static_cast<std::size_t>(nq) * 6);
    p1_val_.resize(static_cast<std::size_t>(nq) * 3);
    for (int k = 0; k < 2; ++k) {
        p2_grad_[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(nq) * 6);
        p1_grad_[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(nq) * 3);
    }
    for (int q = 0; q < nq; ++q) {
        const Vec2 ref = rule_->points[static_cast<std::size_t>(q)];
        const BasisEval p2 = evaluate_basis(SpaceKind::VelocityP2Vector, ref);
        const BasisEval p1 = evaluate_basis(SpaceKind::PotentialP1Scalar, ref);
        for (int a = 0; a < 6; ++a) p2_val_[static_cast<std::size_t>(q * 6 + a)] = p2.value[static_cast<std::size_t>(a)];
        for (int a = 0; a < 3; ++a) p1_val_[static_cast<std::size_t>(q * 3 + a)] = p1.value[static_cast<std::size_t>(a)];
        for (int k = 0; k < 2; ++k) {
            const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(static_cast<TriKind>(k));
            for (int a = 0; a < 6; ++a)
                p2_grad_[static_cast<std::size_t>(k)][static_cast<std::size_t>(q * 6 + a)] = jit * p2.grad[static_cast<std::size_t>(a)];
            for (int a = 0; a < 3; ++a)
                p1_grad_[static_cast<std::size_t>(k)][static_cast<std::size_t>(q * 3 + a)] = jit * p1.grad[static_cast<std::size_t>(a)];
        }
    }

    qp_.resize(static_cast<std::size_t>(mesh.n_triangles()) * static_cast<std::size_t>(nq));
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto corners = mesh.corner_coords(t);
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        const Eigen::Matrix2d& jac = mesh.jacobian(kind);
        for (int q = 0; q < nq; ++q) {
            qp_[static_cast<std::size_t>(t * nq + q)] =
                corners[0] + jac * rule_->points[static_cast<std::size_t>(q)];
        }
    }
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

int minimal_mass_degree(SpaceKind space) {
    return space == SpaceKind::VelocityP2Vector ? 4 : 2;
}
int minimal_stiffness_degree(SpaceKind space) {
    return space == SpaceKind::VelocityP2Vector ? 2 : 1;
}

// Local matrices per element kind at an exact rule; values are
// kind-independent, gradients are not.
using LocalMat = Eigen::Matrix<double, 6, 6>;

LocalMat local_mass(const MeshTopology& mesh, SpaceKind space) {
    const QuadratureRule& rule = quadrature_rule(minimal_mass_degree(space));
    const int nl = local_scalar_dofs(space);
    LocalMat m = LocalMat::Zero();
    for (int q = 0; q < rule.size(); ++q) {
        const BasisEval b = evaluate_basis(space, rule.points[static_cast<std::size_t>(q)]);
        const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
        for (int a = 0; a < nl; ++a)
            for (int c = 0; c < nl; ++c)
                m(a, c) += w * b.value[static_cast<std::size_t>(a)] * b.value[static_cast<std::size_t>(c)];
    }
    return m;
}

LocalMat local_stiffness(const MeshTopology& mesh, SpaceKind space, TriKind kind) {
    const QuadratureRule& rule = quadrature_rule(minimal_stiffness_degree(space));
    const int nl = local_scalar_dofs(space);
    const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
    LocalMat m = LocalMat::Zero();
    for (int q = 0; q < rule.size(); ++q) {
        const BasisEval b = evaluate_basis(space, rule.points[static_cast<std::size_t>(q)]);
        const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
        std::array<Vec2, 6> grads;
        for (int a = 0; a < nl; ++a) grads[static_cast<std::size_t>(a)] = jit * b.grad[static_cast<std::size_t>(a)];
        for (int a = 0; a < nl; ++a)
            for (int c = 0; c < nl; ++c)
                m(a, c) += w * grads[static_cast<std::size_t>(a)].dot(grads[static_cast<std::size_t>(c)]);
    }
    return m;
}

void scatter_blocks(Triplets& trips, const MeshTopology& mesh, const DofMap& dofmap,
                    const LocalMat& lower, const LocalMat& upper) {
    const int nl = local_scalar_dofs(dofmap.space);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const LocalMat& local =
            mesh.triangles()[static_cast<std::size_t>(t)].kind == TriKind::Lower ? lower : upper;
        for (int comp = 0; comp < dofmap.n_components; ++comp) {
            for (int a = 0; a < nl; ++a) {
                const int row = dofmap.global_dof(comp, dofs[static_cast<std::size_t>(a)]);
                for (int c = 0; c < nl; ++c) {
                    trips.emplace_back(row, dofmap.global_dof(comp, dofs[static_cast<std::size_t>(c)]),
                                       local(a, c));
                }
            }
        }
    }
}

} // namespace

SparseOperator assemble_mass(const MeshTopology& mesh, const DofMap& dofmap) {
    const LocalMat local = local_mass(mesh, dofmap.space);
    Triplets trips;
    const int nl = local_scalar_dofs(dofmap.space);
    trips.reserve(static_cast<std::size_t>(mesh.n_triangles()) * static_cast<std::size_t>(nl * nl * dofmap.n_components));
    scatter_blocks(trips, mesh, dofmap, local, local);
    SparseOperator out(dofmap.n_global(), dofmap.n_global());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SparseOperator assemble_stiffness(const MeshTopology& mesh, const DofMap& dofmap) {
    const LocalMat lower = local_stiffness(mesh, dofmap.space, TriKind::Lower);
    const LocalMat upper = local_stiffness(mesh, dofmap.space, TriKind::Upper);
    Triplets trips;
    const int nl = local_scalar_dofs(dofmap.space);
    trips.reserve(static_cast<std::size_t>(mesh.n_triangles()) * static_cast<std::size_t>(nl * nl * dofmap.n_components));
    scatter_blocks(trips, mesh, dofmap, lower, upper);
    SparseOperator out(dofmap.n_global(), dofmap.n_global());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SparseOperator assemble_divergence(const MeshTopology& mesh, const DofMap& velocity,
                                   const DofMap& pressure) {
    SNSFEM_REQUIRE(velocity.space == SpaceKind::VelocityP2Vector,
                   "assemble_divergence: velocity map must be P2 vector");
    SNSFEM_REQUIRE(pressure.space != SpaceKind::VelocityP2Vector,
                   "assemble_divergence: pressure map must be scalar P1");

    // Local blocks d[kind][comp](b, a) = int psi_b dNa/dx_comp, degree-2 exact.
    const QuadratureRule& rule = quadrature_rule(2);
    double local[2][2][3][6] = {};
    for (int k = 0; k < 2; ++k) {
        const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(static_cast<TriKind>(k));
        for (int q = 0; q < rule.size(); ++q) {
            const BasisEval p2 = evaluate_basis(SpaceKind::VelocityP2Vector, rule.points[static_cast<std::size_t>(q)]);
            const BasisEval p1 = evaluate_basis(pressure.space, rule.points[static_cast<std::size_t>(q)]);
            const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
            for (int a = 0; a < 6; ++a) {
                const Vec2 g = jit * p2.grad[static_cast<std::size_t>(a)];
                for (int b = 0; b < 3; ++b) {
                    for (int comp = 0; comp < 2; ++comp) {
                        local[k][comp][b][a] += w * p1.value[static_cast<std::size_t>(b)] * g[comp];
                    }
                }
            }
        }
    }

    Triplets trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_triangles()) * 36);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& vdofs = velocity.cell_dofs[static_cast<std::size_t>(t)];
        const auto& pdofs = pressure.cell_dofs[static_cast<std::size_t>(t)];
        const int k = static_cast<int>(mesh.triangles()[static_cast<std::size_t>(t)].kind);
        for (int b = 0; b < 3; ++b) {
            for (int a = 0; a < 6; ++a) {
                for (int comp = 0; comp < 2; ++comp) {
                    trips.emplace_back(pdofs[static_cast<std::size_t>(b)],
                                       velocity.global_dof(comp, vdofs[static_cast<std::size_t>(a)]),
                                       local[k][comp][b][a]);
                }
            }
        }
    }
    SparseOperator out(pressure.n_global(), velocity.n_global());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Eigen::VectorXd mean_vector(const MeshTopology& mesh, const DofMap& dofmap) {
    const QuadratureRule& rule =
        quadrature_rule(dofmap.space == SpaceKind::VelocityP2Vector ? 2 : 1);
    const int nl = local_scalar_dofs(dofmap.space);
    Eigen::VectorXd local = Eigen::VectorXd::Zero(nl);
    for (int q = 0; q < rule.size(); ++q) {
        const BasisEval b = evaluate_basis(dofmap.space, rule.points[static_cast<std::size_t>(q)]);
        const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
        for (int a = 0; a < nl; ++a) local[a] += w * b.value[static_cast<std::size_t>(a)];
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dofmap.n_global());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        for (int comp = 0; comp < dofmap.n_components; ++comp) {
            for (int a = 0; a < nl; ++a) {
                out[dofmap.global_dof(comp, dofs[static_cast<std::size_t>(a)])] += local[a];
            }
        }
    }
    return out;
}

void apply_trilinear(const AssemblyContext& ctx, const DofMap& dofmap,
                     const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                     Eigen::VectorXd& out) {
    SNSFEM_REQUIRE(dofmap.space == SpaceKind::VelocityP2Vector,
                   "apply_trilinear: fields must live in the P2 velocity space");
    const MeshTopology& mesh = ctx.mesh();
    const int nq = ctx.n_qp();
    const int stride = dofmap.component_stride;
    out.setZero(dofmap.n_global());

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        double wl[2][6], ul[2][6];
        for (int a = 0; a < 6; ++a) {
            const int g = dofs[static_cast<std::size_t>(a)];
            wl[0][a] = w[g];
            wl[1][a] = w[stride + g];
            ul[0][a] = u[g];
            ul[1][a] = u[stride + g];
        }
        double acc[2][6] = {};
        for (int q = 0; q < nq; ++q) {
            double wv[2] = {0.0, 0.0};
            double wgx[2] = {0.0, 0.0}, wgy[2] = {0.0, 0.0};
            double uv[2] = {0.0, 0.0};
            double ugx[2] = {0.0, 0.0}, ugy[2] = {0.0, 0.0};
            for (int a = 0; a < 6; ++a) {
                const double val = ctx.p2_value(q, a);
                const Vec2 g = ctx.p2_grad(kind, q, a);
                for (int c = 0; c < 2; ++c) {
                    wv[c] += wl[c][a] * val;
                    wgx[c] += wl[c][a] * g[0];
                    wgy[c] += wl[c][a] * g[1];
                    uv[c] += ul[c][a] * val;
                    ugx[c] += ul[c][a] * g[0];
                    ugy[c] += ul[c][a] * g[1];
                }
            }
            const double divw = wgx[0] + wgy[1];
            const double scale = ctx.weight_times_det(q);
            for (int c = 0; c < 2; ++c) {
                const double conv = wv[0] * ugx[c] + wv[1] * ugy[c] + 0.5 * divw * uv[c];
                const double s = scale * conv;
                for (int a = 0; a < 6; ++a) acc[c][a] += s * ctx.p2_value(q, a);
            }
        }
        for (int a = 0; a < 6; ++a) {
            const int g = dofs[static_cast<std::size_t>(a)];
            out[g] += acc[0][a];
            out[stride + g] += acc[1][a];
        }
    }
}

Eigen::VectorXd apply_trilinear(const AssemblyContext& ctx, const DofMap& dofmap,
                                const FieldCoefficients& w, const FieldCoefficients& u) {
    Eigen::VectorXd out;
    apply_trilinear(ctx, dofmap, w.values, u.values, out);
    return out;
}

SparseOperator trilinear_n1_scalar(const AssemblyContext& ctx, const DofMap& dofmap,
                                   const FieldCoefficients& w) {
    const MeshTopology& mesh = ctx.mesh();
    const int nq = ctx.n_qp();
    const int stride = dofmap.component_stride;
    Triplets trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_triangles()) * 36);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        double local[6][6] = {};
        for (int q = 0; q < nq; ++q) {
            double wv[2] = {0.0, 0.0};
            double divw = 0.0;
            for (int a = 0; a < 6; ++a) {
                const double val = ctx.p2_value(q, a);
                const Vec2 g = ctx.p2_grad(kind, q, a);
                wv[0] += w.values[dofs[static_cast<std::size_t>(a)]] * val;
                wv[1] += w.values[stride + dofs[static_cast<std::size_t>(a)]] * val;
                divw += w.values[dofs[static_cast<std::size_t>(a)]] * g[0] +
                        w.values[stride + dofs[static_cast<std::size_t>(a)]] * g[1];
            }
            const double scale = ctx.weight_times_det(q);
            for (int b = 0; b < 6; ++b) {
                const Vec2 gb = ctx.p2_grad(kind, q, b);
                const double col = wv[0] * gb[0] + wv[1] * gb[1] + 0.5 * divw * ctx.p2_value(q, b);
                for (int a = 0; a < 6; ++a) {
                    local[a][b] += scale * col * ctx.p2_value(q, a);
                }
            }
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                trips.emplace_back(dofs[static_cast<std::size_t>(a)], dofs[static_cast<std::size_t>(b)], local[a][b]);
    }
    SparseOperator out(dofmap.n_scalar, dofmap.n_scalar);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

TrilinearJacobian trilinear_jacobian(const AssemblyContext& ctx, const DofMap& dofmap,
                                     const FieldCoefficients& w) {
    const MeshTopology& mesh = ctx.mesh();
    const int nq = ctx.n_qp();
    const int stride = dofmap.component_stride;

    TrilinearJacobian out;

    // N1 = blkdiag(scalar block, scalar block).
    const SparseOperator n1s = trilinear_n1_scalar(ctx, dofmap, w);
    Triplets trips;
    trips.reserve(2 * static_cast<std::size_t>(n1s.nonZeros()));
    for (int i = 0; i < n1s.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(n1s, i); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            trips.emplace_back(stride + static_cast<int>(it.row()), stride + static_cast<int>(it.col()), it.value());
        }
    }
    out.n1.resize(dofmap.n_global(), dofmap.n_global());
    out.n1.setFromTriplets(trips.begin(), trips.end());

    // N2(u) = b(u, w, .): entry ((c,a),(d,b)) = int (Nb dw_c/dx_d + 1/2 dNb/dx_d w_c) Na.
    trips.clear();
    trips.reserve(static_cast<std::size_t>(mesh.n_triangles()) * 144);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        double local[2][2][6][6] = {};
        for (int q = 0; q < nq; ++q) {
            double wv[2] = {0.0, 0.0};
            double wg[2][2] = {{0.0, 0.0}, {0.0, 0.0}}; // wg[c][d] = dw_c/dx_d
            for (int a = 0; a < 6; ++a) {
                const double val = ctx.p2_value(q, a);
                const Vec2 g = ctx.p2_grad(kind, q, a);
                for (int c = 0; c < 2; ++c) {
                    const double coeff = w.values[c * stride + dofs[static_cast<std::size_t>(a)]];
                    wv[c] += coeff * val;
                    wg[c][0] += coeff * g[0];
                    wg[c][1] += coeff * g[1];
                }
            }
            const double scale = ctx.weight_times_det(q);
            for (int b = 0; b < 6; ++b) {
                const double vb = ctx.p2_value(q, b);
                const Vec2 gb = ctx.p2_grad(kind, q, b);
                for (int a = 0; a < 6; ++a) {
                    const double va = scale * ctx.p2_value(q, a);
                    for (int c = 0; c < 2; ++c) {
                        for (int d = 0; d < 2; ++d) {
                            local[c][d][a][b] += va * (vb * wg[c][d] + 0.5 * gb[d] * wv[c]);
                        }
                    }
                }
            }
        }
        for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d)
                for (int a = 0; a < 6; ++a)
                    for (int b = 0; b < 6; ++b)
                        trips.emplace_back(c * stride + dofs[static_cast<std::size_t>(a)],
                                           d * stride + dofs[static_cast<std::size_t>(b)],
                                           local[c][d][a][b]);
    }
    out.n2.resize(dofmap.n_global(), dofmap.n_global());
    out.n2.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Eigen::VectorXd assemble_load(const MeshTopology& mesh, const DofMap& dofmap,
                              const AnalyticField& f, int quad_degree) {
    SNSFEM_REQUIRE(static_cast<bool>(f.value), "assemble_load: f.value required");
    const QuadratureRule& rule = quadrature_rule(quad_degree);
    const int nq = rule.size();
    const int nl = local_scalar_dofs(dofmap.space);
    const int nc = dofmap.n_components;

    std::vector<BasisEval> basis(static_cast<std::size_t>(nq));
    for (int q = 0; q < nq; ++q) basis[static_cast<std::size_t>(q)] = evaluate_basis(dofmap.space, rule.points[static_cast<std::size_t>(q)]);

    Eigen::VectorXd out = Eigen::VectorXd::Zero(dofmap.n_global());
    std::array<double, 2> fval{};
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        const auto corners = mesh.corner_coords(t);
        for (int q = 0; q < nq; ++q) {
            const Vec2 x = corners[0] + mesh.jacobian(kind) * rule.points[static_cast<std::size_t>(q)];
            f.value(x, std::span<double>(fval.data(), static_cast<std::size_t>(nc)));
            const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
            for (int c = 0; c < nc; ++c) {
                const double s = w * fval[static_cast<std::size_t>(c)];
                for (int a = 0; a < nl; ++a) {
                    out[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] +=
                        s * basis[static_cast<std::size_t>(q)].value[static_cast<std::size_t>(a)];
                }
            }
        }
    }
    return out;
}

FieldCoefficients l2_project(const MeshTopology& mesh, const DofMap& dofmap,
                             const AnalyticField& f, int quad_degree, double tol) {
    const SparseOperator mass = assemble_mass(mesh, dofmap);
    const Eigen::VectorXd rhs = assemble_load(mesh, dofmap, f, quad_degree);
    FieldCoefficients out;
    out.space = dofmap.space;
    out.values = solve_spd(mass, rhs, tol);
    return out;
}

FieldCoefficients ritz_project(const MeshTopology& mesh, const DofMap& dofmap,
                               const AnalyticField& f, int quad_degree, double tol) {
    SNSFEM_REQUIRE(dofmap.n_components == 1, "ritz_project: scalar spaces only");
    SNSFEM_REQUIRE(static_cast<bool>(f.gradient), "ritz_project: f.gradient required");
    const SparseOperator stiffness = assemble_stiffness(mesh, dofmap);
    const Eigen::VectorXd mean = mean_vector(mesh, dofmap);

    // rhs_a = (grad f, grad chi_a)
    const QuadratureRule& rule = quadrature_rule(quad_degree);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dofmap.n_global());
    std::array<Vec2, 1> fgrad{};
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
        const auto corners = mesh.corner_coords(t);
        for (int q = 0; q < rule.size(); ++q) {
            const Vec2 x = corners[0] + mesh.jacobian(kind) * rule.points[static_cast<std::size_t>(q)];
            f.gradient(x, std::span<Vec2>(fgrad.data(), 1));
            const BasisEval b = evaluate_basis(dofmap.space, rule.points[static_cast<std::size_t>(q)]);
            const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
            for (int a = 0; a < 3; ++a) {
                rhs[dofs[static_cast<std::size_t>(a)]] += w * fgrad[0].dot(jit * b.grad[static_cast<std::size_t>(a)]);
            }
        }
    }

    PinnedPoissonSolver solver(stiffness, mean);
    FieldCoefficients out;
    out.space = dofmap.space;
    out.values = solver.solve(rhs, tol);
    return out;
}

} // namespace snsfem
