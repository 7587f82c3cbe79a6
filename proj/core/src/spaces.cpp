#include "snsfem/spaces.hpp"

#include <cmath>

#include "snsfem/error.hpp"

namespace snsfem {

int space_components(SpaceKind space) {
    return space == SpaceKind::VelocityP2Vector ? 2 : 1;
}

int local_scalar_dofs(SpaceKind space) {
    return space == SpaceKind::VelocityP2Vector ? 6 : 3;
}

namespace {

// Edge dof ids on the torus: n^2 horizontal, then vertical, then diagonal,
// appended after the n^2 vertex dofs.
struct EdgeIds {
    int n;
    int horizontal(int i, int j) const { return n * n + wrap(j) * n + wrap(i); }
    int vertical(int i, int j) const { return 2 * n * n + wrap(j) * n + wrap(i); }
    int diagonal(int i, int j) const { return 3 * n * n + wrap(j) * n + wrap(i); }
    int wrap(int i) const { return ((i % n) + n) % n; }
};

} // namespace

DofMap build_dof_map(const MeshTopology& mesh, SpaceKind space) {
    DofMap map;
    map.space = space;
    map.n_components = space_components(space);
    const int n = mesh.n_side();
    const bool p2 = (space == SpaceKind::VelocityP2Vector);
    map.n_scalar = p2 ? 4 * n * n : n * n;
    map.component_stride = map.n_scalar;
    map.cell_dofs.resize(static_cast<std::size_t>(mesh.n_triangles()));

    const EdgeIds edges{n};
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Triangle& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        std::array<int, 6> dofs{};
        dofs[0] = tri.v[0];
        dofs[1] = tri.v[1];
        dofs[2] = tri.v[2];
        if (p2) {
            const int i = tri.cell_x;
            const int j = tri.cell_y;
            if (tri.kind == TriKind::Lower) {
                dofs[3] = edges.horizontal(i, j); // mid(v0,v1)
                dofs[4] = edges.vertical(i + 1, j); // mid(v1,v2)
                dofs[5] = edges.diagonal(i, j);     // mid(v2,v0)
            } else {
                dofs[3] = edges.diagonal(i, j);       // mid(v0,v1)
                dofs[4] = edges.horizontal(i, j + 1); // mid(v1,v2)
                dofs[5] = edges.vertical(i, j);       // mid(v2,v0)
            }
        }
        map.cell_dofs[static_cast<std::size_t>(t)] = dofs;
    }
    return map;
}

std::vector<Vec2> dof_positions(const MeshTopology& mesh, const DofMap& dofmap) {
    const int n = mesh.n_side();
    const double s = mesh.cell_size();
    std::vector<Vec2> pos(static_cast<std::size_t>(dofmap.n_scalar));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            pos[static_cast<std::size_t>(j * n + i)] = Vec2{i * s, j * s};
        }
    }
    if (dofmap.space == SpaceKind::VelocityP2Vector) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const int e = j * n + i;
                pos[static_cast<std::size_t>(n * n + e)] = Vec2{(i + 0.5) * s, j * s};
                pos[static_cast<std::size_t>(2 * n * n + e)] = Vec2{i * s, (j + 0.5) * s};
                pos[static_cast<std::size_t>(3 * n * n + e)] = Vec2{(i + 0.5) * s, (j + 0.5) * s};
            }
        }
    }
    return pos;
}

BasisEval evaluate_basis(SpaceKind space, Vec2 ref) {
    const double l0 = 1.0 - ref[0] - ref[1];
    const double l1 = ref[0];
    const double l2 = ref[1];
    static const Vec2 g0{-1.0, -1.0};
    static const Vec2 g1{1.0, 0.0};
    static const Vec2 g2{0.0, 1.0};

    BasisEval out;
    if (space != SpaceKind::VelocityP2Vector) {
        out.n = 3;
        out.value = {l0, l1, l2, 0.0, 0.0, 0.0};
        out.grad = {g0, g1, g2, Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
        return out;
    }
    out.n = 6;
    out.value = {l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
                 4.0 * l0 * l1, 4.0 * l1 * l2, 4.0 * l2 * l0};
    out.grad = {(4.0 * l0 - 1.0) * g0,
                (4.0 * l1 - 1.0) * g1,
                (4.0 * l2 - 1.0) * g2,
                4.0 * (l1 * g0 + l0 * g1),
                4.0 * (l2 * g1 + l1 * g2),
                4.0 * (l0 * g2 + l2 * g0)};
    return out;
}

FieldCoefficients zero_field(const DofMap& dofmap) {
    FieldCoefficients f;
    f.space = dofmap.space;
    f.values = Eigen::VectorXd::Zero(dofmap.n_global());
    return f;
}

AnalyticField constant_field(Vec2 value) {
    AnalyticField f;
    f.value = [value](Vec2, std::span<double> out) {
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = value[static_cast<int>(c)];
    };
    f.gradient = [](Vec2, std::span<Vec2> out) {
        for (auto& g : out) g = Vec2::Zero();
    };
    return f;
}

Eigen::Vector2d evaluate_field(const MeshTopology& mesh, const DofMap& dofmap,
                               const FieldCoefficients& field, Vec2 point) {
    SNSFEM_REQUIRE(field.space == dofmap.space, "evaluate_field: space mismatch");
    const PointLocation loc = locate_point(mesh, point);
    const BasisEval basis = evaluate_basis(dofmap.space, loc.ref);
    const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(loc.tri)];
    Eigen::Vector2d out = Eigen::Vector2d::Zero();
    for (int c = 0; c < dofmap.n_components; ++c) {
        double v = 0.0;
        for (int a = 0; a < basis.n; ++a) {
            v += field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] *
                 basis.value[static_cast<std::size_t>(a)];
        }
        out[c] = v;
    }
    return out;
}

Eigen::Matrix2d evaluate_field_gradient(const MeshTopology& mesh, const DofMap& dofmap,
                                        const FieldCoefficients& field, Vec2 point) {
    SNSFEM_REQUIRE(field.space == dofmap.space, "evaluate_field_gradient: space mismatch");
    const PointLocation loc = locate_point(mesh, point);
    const BasisEval basis = evaluate_basis(dofmap.space, loc.ref);
    const TriKind kind = mesh.triangles()[static_cast<std::size_t>(loc.tri)].kind;
    const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
    const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(loc.tri)];
    Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
    for (int c = 0; c < dofmap.n_components; ++c) {
        Vec2 g = Vec2::Zero();
        for (int a = 0; a < basis.n; ++a) {
            g += field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] *
                 basis.grad[static_cast<std::size_t>(a)];
        }
        out.row(c) = (jit * g).transpose();
    }
    return out;
}

namespace {

int exact_norm_degree(SpaceKind space, NormKind which) {
    const bool p2 = (space == SpaceKind::VelocityP2Vector);
    if (which == NormKind::L2) return p2 ? 4 : 2;
    return p2 ? 2 : 1; // P1 gradients are constant; degree-1 rule suffices
}

} // namespace

double compute_norm(const MeshTopology& mesh, const DofMap& dofmap,
                    const FieldCoefficients& field, NormKind which) {
    SNSFEM_REQUIRE(field.space == dofmap.space, "compute_norm: space mismatch");
    const QuadratureRule& rule = quadrature_rule(exact_norm_degree(dofmap.space, which));
    const int nq = rule.size();
    const int nl = local_scalar_dofs(dofmap.space);
    const double det = mesh.abs_det();

    // Tables per kind at the rule points.
    std::vector<BasisEval> basis(static_cast<std::size_t>(nq));
    for (int q = 0; q < nq; ++q) basis[static_cast<std::size_t>(q)] = evaluate_basis(dofmap.space, rule.points[static_cast<std::size_t>(q)]);

    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
        for (int q = 0; q < nq; ++q) {
            const BasisEval& b = basis[static_cast<std::size_t>(q)];
            double val = 0.0;
            for (int c = 0; c < dofmap.n_components; ++c) {
                if (which == NormKind::L2) {
                    double v = 0.0;
                    for (int a = 0; a < nl; ++a)
                        v += field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] * b.value[static_cast<std::size_t>(a)];
                    val += v * v;
                } else {
                    Vec2 g = Vec2::Zero();
                    for (int a = 0; a < nl; ++a)
                        g += field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] * b.grad[static_cast<std::size_t>(a)];
                    val += (jit * g).squaredNorm();
                }
            }
            acc += rule.weights[static_cast<std::size_t>(q)] * det * val;
        }
    }
    return std::sqrt(std::max(acc, 0.0));
}

double broken_h2_seminorm(const MeshTopology& mesh, const DofMap& dofmap,
                          const FieldCoefficients& field) {
    SNSFEM_REQUIRE(field.space == dofmap.space, "broken_h2_seminorm: space mismatch");
    if (dofmap.space != SpaceKind::VelocityP2Vector) return 0.0;

    // P2 second derivatives are constant per element. In reference
    // coordinates: d2N/dref2 has constant entries; push forward with J^-1.
    // Hessians of the P2 basis in reference coordinates (xx, xy, yy):
    static const double hess[6][3] = {
        {4.0, 4.0, 4.0},   // l0(2l0-1)
        {4.0, 0.0, 0.0},   // l1(2l1-1)
        {0.0, 0.0, 4.0},   // l2(2l2-1)
        {-8.0, -4.0, 0.0}, // 4 l0 l1
        {0.0, 4.0, 0.0},   // 4 l1 l2
        {0.0, -4.0, -8.0}, // 4 l2 l0
    };
    const double area = mesh.triangle_area();
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        Eigen::Matrix2d jinv = mesh.jacobian(kind).inverse();
        for (int c = 0; c < 2; ++c) {
            Eigen::Matrix2d href = Eigen::Matrix2d::Zero();
            for (int a = 0; a < 6; ++a) {
                const double coeff = field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])];
                href(0, 0) += coeff * hess[a][0];
                href(0, 1) += coeff * hess[a][1];
                href(1, 0) += coeff * hess[a][1];
                href(1, 1) += coeff * hess[a][2];
            }
            const Eigen::Matrix2d hphys = jinv.transpose() * href * jinv;
            acc += area * hphys.squaredNorm();
        }
    }
    return std::sqrt(acc);
}

double error_norm(const MeshTopology& mesh, const DofMap& dofmap,
                  const FieldCoefficients& field, const AnalyticField& exact,
                  NormKind which, int quad_degree) {
    SNSFEM_REQUIRE(field.space == dofmap.space, "error_norm: space mismatch");
    SNSFEM_REQUIRE(exact.value || which == NormKind::H1Seminorm,
                   "error_norm: exact.value required for L2");
    SNSFEM_REQUIRE(exact.gradient || which == NormKind::L2,
                   "error_norm: exact.gradient required for H1 seminorm");
    const QuadratureRule& rule = quadrature_rule(quad_degree);
    const int nq = rule.size();
    const int nl = local_scalar_dofs(dofmap.space);
    const int nc = dofmap.n_components;
    const double det = mesh.abs_det();

    std::vector<BasisEval> basis(static_cast<std::size_t>(nq));
    for (int q = 0; q < nq; ++q) basis[static_cast<std::size_t>(q)] = evaluate_basis(dofmap.space, rule.points[static_cast<std::size_t>(q)]);

    std::array<double, 2> fval{};
    std::array<Vec2, 2> fgrad{};
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = dofmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
        const auto corners = mesh.corner_coords(t);
        for (int q = 0; q < nq; ++q) {
            const BasisEval& b = basis[static_cast<std::size_t>(q)];
            const Vec2 x = corners[0] + mesh.jacobian(kind) * rule.points[static_cast<std::size_t>(q)];
            double val = 0.0;
            if (which == NormKind::L2) {
                exact.value(x, std::span<double>(fval.data(), static_cast<std::size_t>(nc)));
                for (int c = 0; c < nc; ++c) {
                    double v = -fval[static_cast<std::size_t>(c)];
                    for (int a = 0; a < nl; ++a)
                        v += field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] * b.value[static_cast<std::size_t>(a)];
                    val += v * v;
                }
            } else {
                exact.gradient(x, std::span<Vec2>(fgrad.data(), static_cast<std::size_t>(nc)));
                for (int c = 0; c < nc; ++c) {
                    Vec2 g = Vec2::Zero();
                    for (int a = 0; a < nl; ++a)
                        g += field.values[dofmap.global_dof(c, dofs[static_cast<std::size_t>(a)])] * b.grad[static_cast<std::size_t>(a)];
                    val += (jit * g - fgrad[static_cast<std::size_t>(c)]).squaredNorm();
                }
            }
            acc += rule.weights[static_cast<std::size_t>(q)] * det * val;
        }
    }
    return std::sqrt(std::max(acc, 0.0));
}

} // namespace snsfem
