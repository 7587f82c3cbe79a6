#pragma once

#include <functional>
#include <memory>

#include "snsfem/assembly.hpp"
#include "snsfem/linsolve.hpp"
#include "snsfem/noise.hpp"
#include "snsfem/spaces.hpp"

namespace snsfem {

/// Vector field sampled at the quadrature points of an AssemblyContext;
/// `point_index` is the element-major quadrature point id.
using QuadVectorField = std::function<Vec2(int point_index, Vec2 x)>;

/// Result of the discrete Helmholtz decomposition F = eta + grad(xi):
/// xi is the zero-mean P1 potential; eta is only ever evaluated pointwise
/// (materializing it in a discrete space would break the orthogonality).
struct HelmholtzSplit {
    FieldCoefficients xi;
    double orthogonality_residual = 0.0; ///< relative residual of the Poisson solve
    std::function<Vec2(Vec2)> eta;       ///< eta(x) = F(x) - grad xi(x)
};

/// Poisson solver for the potential space, factorized once per mesh and
/// reused across all steps and paths.
class HelmholtzSolver {
public:
    HelmholtzSolver(const AssemblyContext& ctx, const DofMap& potential);

    const DofMap& potential_map() const { return *potential_; }

    /// Decompose an arbitrary field given at quadrature points. `source_eval`
    /// must also be evaluable at arbitrary points for the returned eta rule.
    HelmholtzSplit split(const QuadVectorField& field_at_qp,
                         const std::function<Vec2(Vec2)>& source_eval, double tol) const;

    /// Right-hand side (F, grad psi_a) and raw solve pieces for callers that
    /// manage their own eta evaluation (the stepper hot path).
    Eigen::VectorXd assemble_gradient_rhs(const QuadVectorField& field_at_qp) const;
    Eigen::VectorXd solve_potential(const Eigen::VectorXd& rhs, double tol) const;
    double residual(const Eigen::VectorXd& xi, const Eigen::VectorXd& rhs) const;

    /// Constant per-element gradient of a P1 potential.
    Vec2 element_gradient(const Eigen::VectorXd& xi, int tri) const;

private:
    const AssemblyContext* ctx_;
    const DofMap* potential_;
    SparseOperator stiffness_;
    std::unique_ptr<PinnedPoissonSolver> poisson_;
};

/// Step I of the scheme: decompose G(u_prev) into grad(xi) plus a discretely
/// divergence-free remainder eta, with (grad xi - G(u_prev), grad phi) = 0
/// for every P1 potential phi.
HelmholtzSplit helmholtz_step(const HelmholtzSolver& solver, const MeshTopology& mesh,
                              const DofMap& velocity, const DiffusionOperator& diffusion,
                              const FieldCoefficients& u_prev, double tol);

} // namespace snsfem
