#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "snsfem/assembly.hpp"
#include "snsfem/linsolve.hpp"
#include "snsfem/mesh.hpp"
#include "snsfem/spaces.hpp"

using namespace snsfem;
using Catch::Approx;

namespace {

FieldCoefficients random_field(const DofMap& map, unsigned seed, double scale = 1.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> unif(-scale, scale);
    FieldCoefficients f = zero_field(map);
    for (int i = 0; i < f.values.size(); ++i) f.values[i] = unif(gen);
    return f;
}

double max_abs(const SparseOperator& a) {
    double m = 0.0;
    for (int i = 0; i < a.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(a, i); it; ++it) {
            m = std::max(m, std::abs(it.value()));
        }
    }
    return m;
}

} // namespace

TEST_CASE("P1 mass: local matrix, total sum, SPD") {
    // Local contribution of one triangle with |K| = 1/2 is (1/24)[[2,1,1],...]
    // realized here on the n=2 unit-torus mesh whose elements have area 1/8:
    // scale by (1/8)/(1/2) = 1/4.
    const MeshTopology mesh = build_periodic_uniform_mesh(2, 1.0);
    const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);
    const SparseOperator mass = assemble_mass(mesh, pmap);

    double total = 0.0;
    for (int i = 0; i < mass.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(mass, i); it; ++it) total += it.value();
    }
    CHECK(total == Approx(1.0).epsilon(1e-13)); // int 1*1 over the unit torus

    // row sums equal vertex-patch area / 3 (6 incident triangles each)
    const Eigen::VectorXd rowsum = mass * Eigen::VectorXd::Ones(mass.cols());
    for (int i = 0; i < rowsum.size(); ++i) {
        CHECK(rowsum[i] == Approx(6.0 * mesh.triangle_area() / 3.0).epsilon(1e-13));
    }

    const MeshTopology m4 = build_periodic_uniform_mesh(4, 1.0);
    const DofMap p4 = build_dof_map(m4, SpaceKind::PressureP1ZeroMean);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(assemble_mass(m4, p4));
    CHECK((dense - dense.transpose()).lpNorm<Eigen::Infinity>() < 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    CHECK(eig.eigenvalues().minCoeff() > 0.0); // dense eigen-oracle on 16x16
}

TEST_CASE("P1 mass local block matches the symbolic (1/24) matrix") {
    // Assemble on one reference-shaped triangle by extracting a single
    // element block: on the n=2 mesh each entry aggregates several elements,
    // so instead verify the symbolic identity via the quadrature rule itself.
    const QuadratureRule& rule = quadrature_rule(2);
    double local[3][3] = {};
    for (int q = 0; q < rule.size(); ++q) {
        const BasisEval b = evaluate_basis(SpaceKind::PressureP1ZeroMean,
                                           rule.points[static_cast<std::size_t>(q)]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                local[i][j] += rule.weights[static_cast<std::size_t>(q)] *
                               b.value[static_cast<std::size_t>(i)] *
                               b.value[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double expected = (i == j ? 2.0 : 1.0) / 24.0;
            CHECK(local[i][j] == Approx(expected).epsilon(1e-14));
        }
    }
}

TEST_CASE("P1 stiffness local matrix on the reference triangle") {
    const QuadratureRule& rule = quadrature_rule(1);
    double local[3][3] = {};
    for (int q = 0; q < rule.size(); ++q) {
        const BasisEval b = evaluate_basis(SpaceKind::PotentialP1Scalar,
                                           rule.points[static_cast<std::size_t>(q)]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                local[i][j] += rule.weights[static_cast<std::size_t>(q)] *
                               b.grad[static_cast<std::size_t>(i)].dot(
                                   b.grad[static_cast<std::size_t>(j)]);
    }
    const double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(local[i][j] == Approx(expected[i][j]).margin(1e-14));
}

TEST_CASE("stiffness: symmetry, constant nullspace, zero row sums") {
    const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
    for (SpaceKind space : {SpaceKind::VelocityP2Vector, SpaceKind::PotentialP1Scalar}) {
        const DofMap map = build_dof_map(mesh, space);
        const SparseOperator k = assemble_stiffness(mesh, map);
        const SparseOperator kt = SparseOperator(k.transpose());
        CHECK(max_abs(SparseOperator(k - kt)) <= 1e-12 * max_abs(k));
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(map.n_global());
        CHECK((k * ones).lpNorm<Eigen::Infinity>() < 1e-13);
        CHECK((kt * ones).lpNorm<Eigen::Infinity>() < 1e-13);
    }
}

TEST_CASE("divergence operator: constants, transpose, symbolic oracle") {
    const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);
    const SparseOperator b = assemble_divergence(mesh, vmap, pmap);
    REQUIRE(b.rows() == pmap.n_global());
    REQUIRE(b.cols() == vmap.n_global());

    FieldCoefficients c = zero_field(vmap);
    c.values.head(vmap.n_scalar).setConstant(2.0);
    c.values.tail(vmap.n_scalar).setConstant(-3.0);
    CHECK((b * c.values).lpNorm<Eigen::Infinity>() < 1e-13);

    // transpose identity on random vectors
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd u(vmap.n_global()), q(pmap.n_global());
    for (int i = 0; i < u.size(); ++i) u[i] = unif(gen);
    for (int i = 0; i < q.size(); ++i) q[i] = unif(gen);
    CHECK((b * u).dot(q) == Approx(u.dot(b.transpose() * q)).epsilon(1e-13));

    // divergence of the P2 interpolant of (sin 2 pi x, 0) against each P1
    // test function, checked per dof against a high-degree quadrature oracle
    FieldCoefficients s = zero_field(vmap);
    const std::vector<Vec2> pos = dof_positions(mesh, vmap);
    for (int g = 0; g < vmap.n_scalar; ++g) {
        s.values[g] = std::sin(2.0 * M_PI * pos[static_cast<std::size_t>(g)][0]);
    }
    const Eigen::VectorXd lhs = b * s.values;
    // oracle: integrate q_h * d/dx(interpolant) with a degree-10 rule
    const QuadratureRule& rule = quadrature_rule(10);
    Eigen::VectorXd oracle = Eigen::VectorXd::Zero(pmap.n_global());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& vdofs = vmap.cell_dofs[static_cast<std::size_t>(t)];
        const auto& pdofs = pmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
        for (int q2 = 0; q2 < rule.size(); ++q2) {
            const BasisEval p2 = evaluate_basis(SpaceKind::VelocityP2Vector,
                                                rule.points[static_cast<std::size_t>(q2)]);
            const BasisEval p1 = evaluate_basis(SpaceKind::PressureP1ZeroMean,
                                                rule.points[static_cast<std::size_t>(q2)]);
            double dudx = 0.0;
            for (int a = 0; a < 6; ++a) {
                dudx += s.values[vdofs[static_cast<std::size_t>(a)]] *
                        (jit * p2.grad[static_cast<std::size_t>(a)])[0];
            }
            const double w = rule.weights[static_cast<std::size_t>(q2)] * mesh.abs_det();
            for (int a = 0; a < 3; ++a) {
                oracle[pdofs[static_cast<std::size_t>(a)]] +=
                    w * dudx * p1.value[static_cast<std::size_t>(a)];
            }
        }
    }
    CHECK((lhs - oracle).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("trilinear form: zero convecting field and constant transported field") {
    const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    const AssemblyContext ctx(mesh, 6);

    const FieldCoefficients zero = zero_field(vmap);
    const FieldCoefficients u = random_field(vmap, 11);
    CHECK(apply_trilinear(ctx, vmap, zero, u).norm() == 0.0);

    // u constant: only the 1/2 (div w) u term survives
    const FieldCoefficients w = random_field(vmap, 12);
    FieldCoefficients cu = zero_field(vmap);
    cu.values.head(vmap.n_scalar).setConstant(1.5);
    cu.values.tail(vmap.n_scalar).setConstant(-0.5);
    const Eigen::VectorXd full = apply_trilinear(ctx, vmap, w, cu);
    // oracle: assemble int 1/2 div(w) * c_comp * phi directly
    Eigen::VectorXd oracle = Eigen::VectorXd::Zero(vmap.n_global());
    const int nq = ctx.n_qp();
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = vmap.cell_dofs[static_cast<std::size_t>(t)];
        const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
        for (int q = 0; q < nq; ++q) {
            double divw = 0.0;
            for (int a = 0; a < 6; ++a) {
                const Vec2 g = ctx.p2_grad(kind, q, a);
                divw += w.values[dofs[static_cast<std::size_t>(a)]] * g[0] +
                        w.values[vmap.n_scalar + dofs[static_cast<std::size_t>(a)]] * g[1];
            }
            const double scale = ctx.weight_times_det(q) * 0.5 * divw;
            for (int a = 0; a < 6; ++a) {
                oracle[dofs[static_cast<std::size_t>(a)]] +=
                    scale * 1.5 * ctx.p2_value(q, a);
                oracle[vmap.n_scalar + dofs[static_cast<std::size_t>(a)]] +=
                    scale * -0.5 * ctx.p2_value(q, a);
            }
        }
    }
    CHECK((full - oracle).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("trilinear skew symmetry over random field pairs") {
    for (int n : {4, 8}) {
        const MeshTopology mesh = build_periodic_uniform_mesh(n, 1.0);
        const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
        const AssemblyContext ctx(mesh, 6);
        const SparseOperator mass = assemble_mass(mesh, vmap);
        const SparseOperator stiff = assemble_stiffness(mesh, vmap);
        for (int trial = 0; trial < 100; ++trial) {
            const FieldCoefficients w = random_field(vmap, 1000 + trial);
            const FieldCoefficients v = random_field(vmap, 2000 + trial);
            const double bwvv = apply_trilinear(ctx, vmap, w, v).dot(v.values);
            const double grad_w = std::sqrt(w.values.dot(stiff * w.values));
            const double v_h1_sq = v.values.dot(stiff * v.values) + v.values.dot(mass * v.values);
            CHECK(std::abs(bwvv) <= 1e-12 * (1.0 + grad_w) * v_h1_sq);
        }
    }
}

TEST_CASE("trilinear jacobian: zero at zero, matrix-free agreement, FD derivative") {
    const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    const AssemblyContext ctx(mesh, 6);

    const TrilinearJacobian at_zero = trilinear_jacobian(ctx, vmap, zero_field(vmap));
    CHECK(max_abs(at_zero.n1) < 1e-15);
    CHECK(max_abs(at_zero.n2) < 1e-15);

    const FieldCoefficients w = random_field(vmap, 77);
    const TrilinearJacobian jac = trilinear_jacobian(ctx, vmap, w);

    // N1 u agrees with the matrix-free application on random u
    for (int trial = 0; trial < 20; ++trial) {
        const FieldCoefficients u = random_field(vmap, 300 + trial);
        const Eigen::VectorXd via_matrix = jac.n1 * u.values;
        const Eigen::VectorXd via_apply = apply_trilinear(ctx, vmap, w, u);
        CHECK((via_matrix - via_apply).lpNorm<Eigen::Infinity>() <=
              1e-12 * (1.0 + via_apply.lpNorm<Eigen::Infinity>()));
    }

    // (N(w+eps z) - N(w))/eps -> (N1+N2) z with O(eps) error (quadratic form)
    const FieldCoefficients z = random_field(vmap, 88);
    const Eigen::VectorXd base = apply_trilinear(ctx, vmap, w, w);
    const Eigen::VectorXd jz = jac.n1 * z.values + jac.n2 * z.values;
    std::vector<double> epsilons{1e-3, 1e-4, 1e-5, 1e-6};
    std::vector<double> errors;
    for (double eps : epsilons) {
        FieldCoefficients wz = w;
        wz.values += eps * z.values;
        const Eigen::VectorXd fd = (apply_trilinear(ctx, vmap, wz, wz) - base) / eps;
        errors.push_back((fd - jz).norm());
    }
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        const double order = std::log(errors[i] / errors[i + 1]) /
                             std::log(epsilons[i] / epsilons[i + 1]);
        CHECK(order >= 0.9);
    }
}

TEST_CASE("l2 projection: constants, rate, idempotence") {
    // constant is reproduced exactly
    {
        const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
        const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
        const FieldCoefficients pc = l2_project(mesh, vmap, constant_field(Vec2{2.0, -1.0}), 4);
        for (int g = 0; g < vmap.n_scalar; ++g) {
            CHECK(pc.values[g] == Approx(2.0).epsilon(1e-11));
            CHECK(pc.values[vmap.n_scalar + g] == Approx(-1.0).epsilon(1e-11));
        }
    }

    // ||f - rho_h f||_L2 decays at order 2 for P1
    AnalyticField f;
    f.value = [](Vec2 p, std::span<double> out) { out[0] = std::sin(2.0 * M_PI * p[0]); };
    std::vector<double> hs, errs;
    for (int n : {8, 16, 32}) {
        const MeshTopology mesh = build_periodic_uniform_mesh(n, 1.0);
        const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);
        const FieldCoefficients proj = l2_project(mesh, pmap, f, 10);
        hs.push_back(mesh.h());
        errs.push_back(error_norm(mesh, pmap, proj, f, NormKind::L2, 10));
    }
    const double order = std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
    CHECK(order == Approx(2.0).margin(0.1));

    // idempotence: projecting an already-discrete field returns it
    {
        const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
        const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);
        const FieldCoefficients g = random_field(pmap, 42);
        AnalyticField wrap;
        wrap.value = [&](Vec2 p, std::span<double> out) {
            out[0] = evaluate_field(mesh, pmap, g, p)[0];
        };
        const FieldCoefficients again = l2_project(mesh, pmap, wrap, 6);
        CHECK((again.values - g.values).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("ritz projection: constants pin to zero, rate, orthogonality") {
    // constant data has zero gradient: projection is the zero (mean-pinned) field
    {
        const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
        const DofMap smap = build_dof_map(mesh, SpaceKind::PotentialP1Scalar);
        AnalyticField c;
        c.gradient = [](Vec2, std::span<Vec2> out) { out[0] = Vec2::Zero(); };
        const FieldCoefficients proj = ritz_project(mesh, smap, c, 4);
        CHECK(proj.values.lpNorm<Eigen::Infinity>() < 1e-12);
    }

    AnalyticField f;
    f.value = [](Vec2 p, std::span<double> out) { out[0] = std::cos(2.0 * M_PI * p[0]); };
    f.gradient = [](Vec2 p, std::span<Vec2> out) {
        out[0] = Vec2{-2.0 * M_PI * std::sin(2.0 * M_PI * p[0]), 0.0};
    };
    std::vector<double> hs, errs;
    for (int n : {8, 16, 32}) {
        const MeshTopology mesh = build_periodic_uniform_mesh(n, 1.0);
        const DofMap smap = build_dof_map(mesh, SpaceKind::PotentialP1Scalar);
        const FieldCoefficients proj = ritz_project(mesh, smap, f, 10);
        hs.push_back(mesh.h());
        errs.push_back(error_norm(mesh, smap, proj, f, NormKind::H1Seminorm, 10));
        if (n == 8) {
            // Galerkin orthogonality: residual of the pinned Poisson system
            const SparseOperator k = assemble_stiffness(mesh, smap);
            // rhs as assembled inside ritz_project
            const QuadratureRule& rule = quadrature_rule(10);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(smap.n_global());
            for (int t = 0; t < mesh.n_triangles(); ++t) {
                const auto& dofs = smap.cell_dofs[static_cast<std::size_t>(t)];
                const TriKind kind = mesh.triangles()[static_cast<std::size_t>(t)].kind;
                const Eigen::Matrix2d& jit = mesh.inv_jacobian_T(kind);
                const auto corners = mesh.corner_coords(t);
                for (int q = 0; q < rule.size(); ++q) {
                    const Vec2 x = corners[0] +
                                   mesh.jacobian(kind) * rule.points[static_cast<std::size_t>(q)];
                    std::array<Vec2, 1> grad{};
                    f.gradient(x, grad);
                    const BasisEval b = evaluate_basis(SpaceKind::PotentialP1Scalar,
                                                       rule.points[static_cast<std::size_t>(q)]);
                    const double w = rule.weights[static_cast<std::size_t>(q)] * mesh.abs_det();
                    for (int a = 0; a < 3; ++a) {
                        rhs[dofs[static_cast<std::size_t>(a)]] +=
                            w * grad[0].dot(jit * b.grad[static_cast<std::size_t>(a)]);
                    }
                }
            }
            CHECK((k * proj.values - rhs).lpNorm<Eigen::Infinity>() < 1e-10);
        }
    }
    const double order = std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
    CHECK(order == Approx(1.0).margin(0.1));
}
