#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "snsfem/error.hpp"
#include "snsfem/mesh.hpp"
#include "snsfem/quadrature.hpp"
#include "snsfem/spaces.hpp"

using namespace snsfem;
using Catch::Approx;

namespace {

// Exact moment on the reference triangle: int x^a y^b = a! b! / (a+b+2)!.
double reference_moment(int a, int b) {
    auto fact = [](int n) {
        double f = 1.0;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    return fact(a) * fact(b) / fact(a + b + 2);
}

} // namespace

TEST_CASE("quadrature rules integrate monomials exactly up to their degree") {
    for (int degree = 1; degree <= 10; ++degree) {
        const QuadratureRule& rule = quadrature_rule(degree);
        REQUIRE(rule.degree >= degree);
        double wsum = 0.0;
        for (double w : rule.weights) {
            REQUIRE(w > 0.0);
            wsum += w;
        }
        CHECK(wsum == Approx(0.5).margin(1e-14));
        for (int a = 0; a + 0 <= rule.degree; ++a) {
            for (int b = 0; a + b <= rule.degree; ++b) {
                double acc = 0.0;
                for (int q = 0; q < rule.size(); ++q) {
                    acc += rule.weights[static_cast<std::size_t>(q)] *
                           std::pow(rule.points[static_cast<std::size_t>(q)][0], a) *
                           std::pow(rule.points[static_cast<std::size_t>(q)][1], b);
                }
                INFO("degree " << rule.degree << " monomial x^" << a << " y^" << b);
                CHECK(acc == Approx(reference_moment(a, b)).epsilon(1e-12).margin(1e-14));
            }
        }
    }
    CHECK_THROWS_AS(quadrature_rule(0), InvalidArgument);
    CHECK_THROWS_AS(quadrature_rule(11), InvalidArgument);
}

TEST_CASE("random polynomials of the declared degree integrate exactly") {
    std::mt19937 gen(1234);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    for (int degree : {2, 4, 6, 8, 10}) {
        const QuadratureRule& rule = quadrature_rule(degree);
        for (int trial = 0; trial < 5; ++trial) {
            double exact = 0.0;
            std::vector<std::array<double, 3>> terms; // (a, b, c)
            for (int a = 0; a <= degree; ++a) {
                for (int b = 0; a + b <= degree; ++b) {
                    const double c = coeff(gen);
                    terms.push_back({double(a), double(b), c});
                    exact += c * reference_moment(a, b);
                }
            }
            double acc = 0.0;
            for (int q = 0; q < rule.size(); ++q) {
                const Vec2 p = rule.points[static_cast<std::size_t>(q)];
                double val = 0.0;
                for (const auto& t : terms) {
                    val += t[2] * std::pow(p[0], int(t[0])) * std::pow(p[1], int(t[1]));
                }
                acc += rule.weights[static_cast<std::size_t>(q)] * val;
            }
            CHECK(acc == Approx(exact).epsilon(1e-13).margin(1e-14));
        }
    }
}

TEST_CASE("dof counts on the torus") {
    const MeshTopology m4 = build_periodic_uniform_mesh(4, 1.0);
    const DofMap pressure = build_dof_map(m4, SpaceKind::PressureP1ZeroMean);
    CHECK(pressure.n_global() == 16);

    const DofMap velocity = build_dof_map(m4, SpaceKind::VelocityP2Vector);
    CHECK(velocity.n_scalar == 64); // vertices + edge midpoints
    CHECK(velocity.n_global() == 128);

    const MeshTopology m2 = build_periodic_uniform_mesh(2, 1.0);
    const DofMap potential = build_dof_map(m2, SpaceKind::PotentialP1Scalar);
    CHECK(potential.n_global() == 4);
}

TEST_CASE("dof maps are deterministic and seam-identified") {
    const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
    const DofMap a = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    const DofMap b = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    CHECK(a.cell_dofs == b.cell_dofs);
    for (const auto& dofs : a.cell_dofs) {
        for (int i = 0; i < 6; ++i) {
            CHECK(dofs[static_cast<std::size_t>(i)] >= 0);
            CHECK(dofs[static_cast<std::size_t>(i)] < a.n_scalar);
        }
    }
}

TEST_CASE("Lagrange property at the nodes") {
    const BasisEval p1 = evaluate_basis(SpaceKind::PressureP1ZeroMean, Vec2{0.0, 0.0});
    CHECK(p1.value[0] == Approx(1.0));
    CHECK(p1.value[1] == Approx(0.0).margin(1e-15));
    CHECK(p1.value[2] == Approx(0.0).margin(1e-15));

    // P2 node order: vertices then midpoints of edges (01), (12), (20)
    const Vec2 nodes[6] = {Vec2{0.0, 0.0}, Vec2{1.0, 0.0}, Vec2{0.0, 1.0},
                           Vec2{0.5, 0.0}, Vec2{0.5, 0.5}, Vec2{0.0, 0.5}};
    for (int node = 0; node < 6; ++node) {
        const BasisEval p2 = evaluate_basis(SpaceKind::VelocityP2Vector, nodes[node]);
        for (int a = 0; a < 6; ++a) {
            CHECK(p2.value[static_cast<std::size_t>(a)] ==
                  Approx(a == node ? 1.0 : 0.0).margin(1e-14));
        }
    }

    // constant P1 gradients (symbolic differentiation oracle)
    const BasisEval g = evaluate_basis(SpaceKind::PotentialP1Scalar, Vec2{0.3, 0.2});
    CHECK(g.grad[0][0] == Approx(-1.0));
    CHECK(g.grad[0][1] == Approx(-1.0));
    CHECK(g.grad[1][0] == Approx(1.0));
    CHECK(g.grad[1][1] == Approx(0.0).margin(1e-15));
    CHECK(g.grad[2][0] == Approx(0.0).margin(1e-15));
    CHECK(g.grad[2][1] == Approx(1.0));
}

TEST_CASE("partition of unity at random reference points") {
    std::mt19937 gen(99);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        double x = unif(gen), y = unif(gen);
        if (x + y > 1.0) {
            x = 1.0 - x;
            y = 1.0 - y;
        }
        for (SpaceKind space : {SpaceKind::VelocityP2Vector, SpaceKind::PressureP1ZeroMean}) {
            const BasisEval b = evaluate_basis(space, Vec2{x, y});
            double sum = 0.0;
            Vec2 gsum = Vec2::Zero();
            for (int a = 0; a < b.n; ++a) {
                sum += b.value[static_cast<std::size_t>(a)];
                gsum += b.grad[static_cast<std::size_t>(a)];
            }
            CHECK(sum == Approx(1.0).epsilon(1e-14));
            CHECK(gsum.norm() == Approx(0.0).margin(1e-13));
        }
    }
}

TEST_CASE("field evaluation: constants, interpolants, zero") {
    const MeshTopology mesh = build_periodic_uniform_mesh(4, 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);

    FieldCoefficients ones = zero_field(vmap);
    ones.values.setOnes();
    const Eigen::Vector2d v = evaluate_field(mesh, vmap, ones, Vec2{0.37, 0.81});
    CHECK(v[0] == Approx(1.0).epsilon(1e-14));
    CHECK(v[1] == Approx(1.0).epsilon(1e-14));

    // P2 reproduces x^2 exactly away from the seam
    FieldCoefficients xsq = zero_field(vmap);
    const std::vector<Vec2> pos = dof_positions(mesh, vmap);
    for (int g = 0; g < vmap.n_scalar; ++g) {
        xsq.values[g] = pos[static_cast<std::size_t>(g)][0] * pos[static_cast<std::size_t>(g)][0];
    }
    for (Vec2 p : {Vec2{0.11, 0.06}, Vec2{0.62, 0.40}, Vec2{0.21, 0.93}}) {
        const Eigen::Vector2d val = evaluate_field(mesh, vmap, xsq, p);
        CHECK(val[0] == Approx(p[0] * p[0]).margin(1e-13));
    }

    const FieldCoefficients zero = zero_field(vmap);
    CHECK(evaluate_field(mesh, vmap, zero, Vec2{0.5, 0.5}).norm() == 0.0);
}

TEST_CASE("norms: zero, constants, and the sin oracle") {
    const MeshTopology mesh = build_periodic_uniform_mesh(64, 1.0);
    const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);

    CHECK(compute_norm(mesh, pmap, zero_field(pmap), NormKind::L2) == 0.0);

    FieldCoefficients c = zero_field(pmap);
    c.values.setConstant(-2.5);
    CHECK(compute_norm(mesh, pmap, c, NormKind::L2) == Approx(2.5).epsilon(1e-13));
    CHECK(compute_norm(mesh, pmap, c, NormKind::H1Seminorm) == Approx(0.0).margin(1e-12));

    // P1 interpolant of sin(2 pi x): ||sin||_L2 = 1/sqrt(2)
    FieldCoefficients s = zero_field(pmap);
    const std::vector<Vec2> pos = dof_positions(mesh, pmap);
    for (int g = 0; g < pmap.n_scalar; ++g) {
        s.values[g] = std::sin(2.0 * M_PI * pos[static_cast<std::size_t>(g)][0]);
    }
    CHECK(compute_norm(mesh, pmap, s, NormKind::L2) ==
          Approx(1.0 / std::sqrt(2.0)).margin(1e-3));
}

TEST_CASE("error_norm against an analytic field") {
    const MeshTopology mesh = build_periodic_uniform_mesh(8, 1.0);
    const DofMap pmap = build_dof_map(mesh, SpaceKind::PressureP1ZeroMean);
    AnalyticField f;
    f.value = [](Vec2 p, std::span<double> out) { out[0] = 3.0 * p[0] - 1.0; };
    f.gradient = [](Vec2, std::span<Vec2> out) { out[0] = Vec2{3.0, 0.0}; };
    // interpolate exactly (linear function is in P1 except the seam wrap;
    // restrict the check to the identity on the coefficients instead)
    FieldCoefficients lin = zero_field(pmap);
    const std::vector<Vec2> pos = dof_positions(mesh, pmap);
    for (int g = 0; g < pmap.n_scalar; ++g) {
        lin.values[g] = 3.0 * pos[static_cast<std::size_t>(g)][0] - 1.0;
    }
    // away from the seam the P1 interpolant reproduces the linear exactly;
    // the seam cells wrap, so only check a coarse upper bound here
    const double err = error_norm(mesh, pmap, lin, f, NormKind::L2, 6);
    CHECK(err < 3.0);
    // an exact-in-space constant matches to machine precision
    AnalyticField c;
    c.value = [](Vec2, std::span<double> out) { out[0] = -2.0; };
    FieldCoefficients cf = zero_field(pmap);
    cf.values.setConstant(-2.0);
    CHECK(error_norm(mesh, pmap, cf, c, NormKind::L2, 4) == Approx(0.0).margin(1e-13));
}

TEST_CASE("broken H2 seminorm matches a finite-difference oracle") {
    const MeshTopology mesh = build_periodic_uniform_mesh(3, 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    FieldCoefficients f = zero_field(vmap);
    for (int g = 0; g < f.values.size(); ++g) f.values[g] = unif(gen);

    // P2 second derivatives are constant per element; difference the exact
    // gradient around each centroid with a step that stays inside.
    const double delta = mesh.cell_size() / 64.0;
    double acc = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto c = mesh.corner_coords(t);
        const Vec2 centroid = (c[0] + c[1] + c[2]) / 3.0;
        for (int d = 0; d < 2; ++d) {
            Vec2 plus = centroid, minus = centroid;
            plus[d] += delta;
            minus[d] -= delta;
            const Eigen::Matrix2d gp = evaluate_field_gradient(mesh, vmap, f, plus);
            const Eigen::Matrix2d gm = evaluate_field_gradient(mesh, vmap, f, minus);
            const Eigen::Matrix2d col = (gp - gm) / (2.0 * delta); // D(grad u) in direction d
            acc += mesh.triangle_area() * col.squaredNorm();
        }
    }
    CHECK(broken_h2_seminorm(mesh, vmap, f) == Approx(std::sqrt(acc)).epsilon(1e-7));
}
