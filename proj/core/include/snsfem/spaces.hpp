#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "snsfem/mesh.hpp"
#include "snsfem/quadrature.hpp"

namespace snsfem {

/// The three discrete spaces of the scheme: P2 vector velocity, P1 zero-mean
/// pressure, and P1 scalar potential for the noise decomposition.
enum class SpaceKind { VelocityP2Vector, PressureP1ZeroMean, PotentialP1Scalar };

int space_components(SpaceKind space);      // 2 for velocity, 1 otherwise
int local_scalar_dofs(SpaceKind space);     // 6 for P2, 3 for P1

/// Global degree-of-freedom layout. Vector fields are block-by-component:
/// global dof of (component c, scalar dof g) is c*component_stride + g.
struct DofMap {
    SpaceKind space = SpaceKind::PotentialP1Scalar;
    int n_scalar = 0;          ///< scalar dofs per component
    int n_components = 1;
    int component_stride = 0;  ///< == n_scalar
    std::vector<std::array<int, 6>> cell_dofs; ///< per-triangle scalar dofs (first 3 for P1)

    int n_global() const { return n_scalar * n_components; }
    int global_dof(int component, int scalar) const {
        return component * component_stride + scalar;
    }
};

DofMap build_dof_map(const MeshTopology& mesh, SpaceKind space);

/// Physical positions of the scalar dofs (vertices, then edge midpoints for P2).
std::vector<Vec2> dof_positions(const MeshTopology& mesh, const DofMap& dofmap);

/// Scalar Lagrange basis of the space's family at a reference point.
struct BasisEval {
    int n = 0;
    std::array<double, 6> value{};
    std::array<Vec2, 6> grad{}; ///< reference gradients
};

BasisEval evaluate_basis(SpaceKind space, Vec2 ref_point);

/// Coefficients of a discrete field; length n_scalar * n_components.
struct FieldCoefficients {
    SpaceKind space = SpaceKind::PotentialP1Scalar;
    Eigen::VectorXd values;
};

FieldCoefficients zero_field(const DofMap& dofmap);

/// Pointwise-evaluable analytic field used for projections, loads and error
/// norms. `value` fills one entry per component; `gradient` (optional unless
/// an H1 quantity is requested) fills the per-component gradients.
struct AnalyticField {
    std::function<void(Vec2, std::span<double>)> value;
    std::function<void(Vec2, std::span<Vec2>)> gradient;
};

AnalyticField constant_field(Vec2 value);

/// Evaluate at a physical point (wrapped periodically). Scalar spaces fill
/// only component 0 of the result.
Eigen::Vector2d evaluate_field(const MeshTopology& mesh, const DofMap& dofmap,
                               const FieldCoefficients& field, Vec2 point);

/// Gradient of each component at a physical point (rows = components).
Eigen::Matrix2d evaluate_field_gradient(const MeshTopology& mesh, const DofMap& dofmap,
                                        const FieldCoefficients& field, Vec2 point);

enum class NormKind { L2, H1Seminorm };

/// Norm of a discrete field, integrated with a rule exact for the integrand.
double compute_norm(const MeshTopology& mesh, const DofMap& dofmap,
                    const FieldCoefficients& field, NormKind which);

/// Element-wise L2 norm of all second derivatives (constant per element for
/// P2, zero for P1); a mesh-dependent surrogate for the H2 seminorm.
double broken_h2_seminorm(const MeshTopology& mesh, const DofMap& dofmap,
                          const FieldCoefficients& field);

/// || field - exact || in the requested norm, quadrature of the given degree.
double error_norm(const MeshTopology& mesh, const DofMap& dofmap,
                  const FieldCoefficients& field, const AnalyticField& exact,
                  NormKind which, int quad_degree);

} // namespace snsfem
