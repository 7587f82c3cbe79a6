#include "snsfem/mesh.hpp"

#include <cmath>
#include <ostream>

#include "snsfem/error.hpp"

namespace snsfem {

int MeshTopology::owned_vertex(int i, int j) const {
    const int n = n_side_;
    int ii = i % n;
    int jj = j % n;
    if (ii < 0) ii += n;
    if (jj < 0) jj += n;
    return jj * n + ii;
}

std::array<Vec2, 3> MeshTopology::corner_coords(int t) const {
    const Triangle& tri = triangles_[static_cast<std::size_t>(t)];
    const double s = cell_size_;
    const double x0 = tri.cell_x * s;
    const double y0 = tri.cell_y * s;
    if (tri.kind == TriKind::Lower) {
        return {Vec2{x0, y0}, Vec2{x0 + s, y0}, Vec2{x0 + s, y0 + s}};
    }
    return {Vec2{x0, y0}, Vec2{x0 + s, y0 + s}, Vec2{x0, y0 + s}};
}

MeshTopology build_periodic_uniform_mesh(int n_side, double period_L) {
    SNSFEM_REQUIRE(n_side >= 2, "build_periodic_uniform_mesh: n_side must be >= 2");
    SNSFEM_REQUIRE(period_L > 0.0, "build_periodic_uniform_mesh: period_L must be positive");

    MeshTopology mesh;
    mesh.n_side_ = n_side;
    mesh.period_L_ = period_L;
    mesh.cell_size_ = period_L / n_side;
    mesh.h_ = std::sqrt(2.0) * mesh.cell_size_;
    mesh.abs_det_ = mesh.cell_size_ * mesh.cell_size_;

    const int n = n_side;
    mesh.vertices_.resize(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            mesh.vertices_[static_cast<std::size_t>(j * n + i)] =
                Vec2{i * mesh.cell_size_, j * mesh.cell_size_};
        }
    }

    mesh.lattice_to_owned_.resize(static_cast<std::size_t>(n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            mesh.lattice_to_owned_[static_cast<std::size_t>(j * (n + 1) + i)] =
                (j % n) * n + (i % n);
        }
    }

    mesh.triangles_.reserve(static_cast<std::size_t>(2 * n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = mesh.owned_vertex(i, j);
            const int v10 = mesh.owned_vertex(i + 1, j);
            const int v11 = mesh.owned_vertex(i + 1, j + 1);
            const int v01 = mesh.owned_vertex(i, j + 1);
            mesh.triangles_.push_back(Triangle{{v00, v10, v11}, i, j, TriKind::Lower});
            mesh.triangles_.push_back(Triangle{{v00, v11, v01}, i, j, TriKind::Upper});
        }
    }

    const double s = mesh.cell_size_;
    // Lower: columns (P1-P0, P2-P0) = ((s,0),(s,s)); Upper: ((s,s),(0,s)).
    mesh.jac_[0] << s, s, 0.0, s;
    mesh.jac_[1] << s, 0.0, s, s;
    for (int k = 0; k < 2; ++k) {
        mesh.inv_jac_t_[static_cast<std::size_t>(k)] = mesh.jac_[static_cast<std::size_t>(k)].inverse().transpose();
    }
    return mesh;
}

RefMap reference_map(const MeshTopology& mesh, int tri_index, Vec2 ref_point) {
    SNSFEM_REQUIRE(tri_index >= 0 && tri_index < mesh.n_triangles(),
                   "reference_map: triangle index out of range");
    const auto corners = mesh.corner_coords(tri_index);
    const TriKind kind = mesh.triangles()[static_cast<std::size_t>(tri_index)].kind;
    RefMap out;
    out.jacobian = mesh.jacobian(kind);
    out.abs_det = mesh.abs_det();
    out.point = corners[0] + out.jacobian * ref_point;
    return out;
}

PointLocation locate_point(const MeshTopology& mesh, Vec2 p) {
    const double L = mesh.period_L();
    const int n = mesh.n_side();
    const double s = mesh.cell_size();
    const double tol = 1e-12;

    PointLocation loc;
    double frac[2];
    int cell[2];
    for (int d = 0; d < 2; ++d) {
        double u = std::fmod(p[d], L);
        if (u < 0.0) u += L;
        double c = u / s;
        int ic = static_cast<int>(std::floor(c));
        double f = c - ic;
        // Near the upper face of a cell the point belongs to the boundary
        // shared with the next cell; keep the lower-index cell.
        if (f > 1.0 - tol) {
            f = 1.0;
        }
        if (ic >= n) { // u == L up to rounding
            ic = n - 1;
            f = 1.0;
        }
        cell[d] = ic;
        frac[d] = f;
    }

    const int tri_base = 2 * (cell[1] * n + cell[0]);
    const double fx = frac[0];
    const double fy = frac[1];
    if (fy <= fx + tol) { // lower triangle (ties go to the first-listed)
        loc.tri = tri_base;
        loc.ref = Vec2{fx - fy, fy};
        if (loc.ref[0] < 0.0) loc.ref[0] = 0.0;
    } else {
        loc.tri = tri_base + 1;
        loc.ref = Vec2{fx, fy - fx};
    }
    return loc;
}

void dump_mesh(const MeshTopology& mesh, std::ostream& os) {
    for (const Vec2& v : mesh.vertices()) {
        os << "v " << v[0] << " " << v[1] << "\n";
    }
    for (const Triangle& t : mesh.triangles()) {
        os << "t " << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
    }
}

} // namespace snsfem
