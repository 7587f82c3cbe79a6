#pragma once

#include <Eigen/Sparse>

#include "snsfem/mesh.hpp"
#include "snsfem/quadrature.hpp"
#include "snsfem/spaces.hpp"

namespace snsfem {

/// Assembled operators are compressed-row sparse with duplicates merged.
using SparseOperator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Precomputed per-mesh tables at one quadrature rule: physical quadrature
/// points (element-major) and basis values / physical gradients per element
/// kind. All elements of a kind share one affine geometry, so the tables are
/// tiny and the hot loops reduce to dense gathers.
class AssemblyContext {
public:
    AssemblyContext(const MeshTopology& mesh, int quad_degree);

    const MeshTopology& mesh() const { return *mesh_; }
    const QuadratureRule& rule() const { return *rule_; }
    int n_qp() const { return rule_->size(); }
    double weight_times_det(int q) const { return wdet_[static_cast<std::size_t>(q)]; }

    Vec2 physical_point(int t, int q) const {
        return qp_[static_cast<std::size_t>(t * n_qp() + q)];
    }
    const std::vector<Vec2>& physical_points() const { return qp_; }

    double p2_value(int q, int a) const { return p2_val_[static_cast<std::size_t>(q * 6 + a)]; }
    double p1_value(int q, int a) const { return p1_val_[static_cast<std::size_t>(q * 3 + a)]; }
    Vec2 p2_grad(TriKind k, int q, int a) const {
        return p2_grad_[static_cast<int>(k)][static_cast<std::size_t>(q * 6 + a)];
    }
    Vec2 p1_grad(TriKind k, int q, int a) const {
        return p1_grad_[static_cast<int>(k)][static_cast<std::size_t>(q * 3 + a)];
    }

private:
    const MeshTopology* mesh_;
    const QuadratureRule* rule_;
    std::vector<double> wdet_;
    std::vector<Vec2> qp_;
    std::vector<double> p2_val_, p1_val_;
    std::array<std::vector<Vec2>, 2> p2_grad_, p1_grad_;
};

/// Mass operator (phi_j, phi_i); block-diagonal per component for vector
/// spaces. Integrated exactly.
SparseOperator assemble_mass(const MeshTopology& mesh, const DofMap& dofmap);

/// Stiffness operator (grad phi_j, grad phi_i), without any viscosity factor.
SparseOperator assemble_stiffness(const MeshTopology& mesh, const DofMap& dofmap);

/// Divergence coupling B with B(q, v) = (div phi_v, psi_q); shape
/// (n_pressure x n_velocity_global).
SparseOperator assemble_divergence(const MeshTopology& mesh, const DofMap& velocity,
                                   const DofMap& pressure);

/// Load vector of (phi_i, 1), i.e. the discrete mean functional.
Eigen::VectorXd mean_vector(const MeshTopology& mesh, const DofMap& dofmap);

/// Residual vector N(w,u) with N(w,u).v = b(w,u,v) = (w.grad u, v)
/// + 1/2((div w) u, v), integrated with the context's rule.
Eigen::VectorXd apply_trilinear(const AssemblyContext& ctx, const DofMap& dofmap,
                                const FieldCoefficients& w, const FieldCoefficients& u);
void apply_trilinear(const AssemblyContext& ctx, const DofMap& dofmap,
                     const Eigen::VectorXd& w, const Eigen::VectorXd& u,
                     Eigen::VectorXd& out);

/// Linearizations of b at w: N1 u = b(w,u,.), N2 u = b(u,w,.);
/// N1 + N2 is the Frechet derivative of u -> N(u,u) at w.
struct TrilinearJacobian {
    SparseOperator n1;
    SparseOperator n2;
};
TrilinearJacobian trilinear_jacobian(const AssemblyContext& ctx, const DofMap& dofmap,
                                     const FieldCoefficients& w);

/// Scalar convection block (w.grad Nb + 1/2 (div w) Nb, Na); N1 is this block
/// repeated per component.
SparseOperator trilinear_n1_scalar(const AssemblyContext& ctx, const DofMap& dofmap,
                                   const FieldCoefficients& w);

/// Load vector (f, phi_i) with f evaluated at quadrature points.
Eigen::VectorXd assemble_load(const MeshTopology& mesh, const DofMap& dofmap,
                              const AnalyticField& f, int quad_degree);

/// L2 projection into the space: mass solve of (f - Pf, phi) = 0.
FieldCoefficients l2_project(const MeshTopology& mesh, const DofMap& dofmap,
                             const AnalyticField& f, int quad_degree = 6,
                             double tol = 1e-10);

/// Ritz projection into a scalar P1 space: (grad(f - Rf), grad chi) = 0 with
/// the zero-mean pinning done via a mean Lagrange multiplier.
FieldCoefficients ritz_project(const MeshTopology& mesh, const DofMap& dofmap,
                               const AnalyticField& f, int quad_degree = 6,
                               double tol = 1e-10);

} // namespace snsfem
