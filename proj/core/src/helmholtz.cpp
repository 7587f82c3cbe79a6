#include "snsfem/helmholtz.hpp"

#include "snsfem/error.hpp"

namespace snsfem {

HelmholtzSolver::HelmholtzSolver(const AssemblyContext& ctx, const DofMap& potential)
    : ctx_(&ctx), potential_(&potential) {
    SNSFEM_REQUIRE(potential.space == SpaceKind::PotentialP1Scalar,
                   "HelmholtzSolver: potential space expected");
    stiffness_ = assemble_stiffness(ctx.mesh(), potential);
    poisson_ = std::make_unique<PinnedPoissonSolver>(stiffness_,
                                                     mean_vector(ctx.mesh(), potential));
}

Eigen::VectorXd HelmholtzSolver::assemble_gradient_rhs(const QuadVectorField& field_at_qp) const {
    const MeshTopology& mesh = ctx_->mesh();
    const int nq = ctx_->n_qp();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(potential_->n_global());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = potential_->cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        double acc[3] = {};
        for (int q = 0; q < nq; ++q) {
            const int pid = t * nq + q;
            const Vec2 f = field_at_qp(pid, ctx_->physical_point(t, q));
            const double scale = ctx_->weight_times_det(q);
            for (int a = 0; a < 3; ++a) {
                acc[a] += scale * f.dot(ctx_->p1_grad(kind, q, a));
            }
        }
        for (int a = 0; a < 3; ++a) rhs[dofs[static_cast<std::size_t>(a)]] += acc[a];
    }
    return rhs;
}

Eigen::VectorXd HelmholtzSolver::solve_potential(const Eigen::VectorXd& rhs, double tol) const {
    return poisson_->solve(rhs, tol);
}

double HelmholtzSolver::residual(const Eigen::VectorXd& xi, const Eigen::VectorXd& rhs) const {
    return poisson_->residual(xi, rhs);
}

Vec2 HelmholtzSolver::element_gradient(const Eigen::VectorXd& xi, int tri) const {
    const MeshTopology& mesh = ctx_->mesh();
    const auto& dofs = potential_->cell_dofs[static_cast<std::size_t>(tri)];
    const TriKind kind = mesh.triangles()[static_cast<std::size_t>(tri)].kind;
    Vec2 g = Vec2::Zero();
    for (int a = 0; a < 3; ++a) {
        g += xi[dofs[static_cast<std::size_t>(a)]] * ctx_->p1_grad(kind, 0, a);
    }
    return g;
}

HelmholtzSplit HelmholtzSolver::split(const QuadVectorField& field_at_qp,
                                      const std::function<Vec2(Vec2)>& source_eval,
                                      double tol) const {
    const Eigen::VectorXd rhs = assemble_gradient_rhs(field_at_qp);
    HelmholtzSplit out;
    out.xi.space = SpaceKind::PotentialP1Scalar;
    out.xi.values = solve_potential(rhs, tol);
    out.orthogonality_residual = residual(out.xi.values, rhs);

    const MeshTopology* mesh = &ctx_->mesh();
    const DofMap* pot = potential_;
    const Eigen::VectorXd xi = out.xi.values;
    out.eta = [mesh, pot, xi, source_eval](Vec2 x) -> Vec2 {
        const PointLocation loc = locate_point(*mesh, x);
        const TriKind kind = mesh->triangles()[static_cast<std::size_t>(loc.tri)].kind;
        const Eigen::Matrix2d& jit = mesh->inv_jacobian_T(kind);
        const auto& dofs = pot->cell_dofs[static_cast<std::size_t>(loc.tri)];
        // P1 gradient is constant per element.
        static const Vec2 ref_grads[3] = {Vec2{-1.0, -1.0}, Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
        Vec2 g = Vec2::Zero();
        for (int a = 0; a < 3; ++a) g += xi[dofs[static_cast<std::size_t>(a)]] * ref_grads[a];
        return source_eval(x) - jit * g;
    };
    return out;
}

HelmholtzSplit helmholtz_step(const HelmholtzSolver& solver, const MeshTopology& mesh,
                              const DofMap& velocity, const DiffusionOperator& diffusion,
                              const FieldCoefficients& u_prev, double tol) {
    SNSFEM_REQUIRE(velocity.space == SpaceKind::VelocityP2Vector,
                   "helmholtz_step: velocity space expected");
    auto eval_G = [&mesh, &velocity, &diffusion, &u_prev](Vec2 x) -> Vec2 {
        return diffusion.apply(evaluate_field(mesh, velocity, u_prev, x));
    };
    auto at_qp = [&eval_G](int, Vec2 x) -> Vec2 { return eval_G(x); };
    return solver.split(at_qp, eval_G, tol);
}

} // namespace snsfem
