#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace snsfem {

using Vec2 = Eigen::Vector2d;

/// Each square cell of the lattice is split along the (i,j)->(i+1,j+1)
/// diagonal. Lower covers {y <= x} of the unit cell, Upper covers {y >= x}.
enum class TriKind : std::uint8_t { Lower = 0, Upper = 1 };

struct Triangle {
    std::array<int, 3> v; ///< owned vertex ids, counter-clockwise
    int cell_x = 0;       ///< lattice cell column
    int cell_y = 0;       ///< lattice cell row
    TriKind kind = TriKind::Lower;
};

/// Uniform right-triangulated mesh of the torus (0,L)^2.
///
/// Vertices are stored for the fundamental domain only; the periodic seam is
/// handled by index identification (periodic_vertex_map), never by wrapping
/// coordinates. Triangle corner coordinates are reconstructed unwrapped from
/// the cell lattice, so geometry stays single-valued across the seam.
class MeshTopology {
public:
    int n_side() const { return n_side_; }
    double period_L() const { return period_L_; }
    /// Longest edge (the cell diagonal), sqrt(2)*L/n_side.
    double h() const { return h_; }
    double cell_size() const { return cell_size_; }
    /// All elements are congruent: area = L^2 / (2 n^2).
    double triangle_area() const { return 0.5 * cell_size_ * cell_size_; }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    int n_triangles() const { return static_cast<int>(triangles_.size()); }

    /// Ghost lattice position (i,j), 0 <= i,j <= n_side, to owned vertex id.
    int owned_vertex(int i, int j) const;
    /// The full (n+1)^2 lattice-to-owned table, row-major in j.
    const std::vector<int>& periodic_vertex_map() const { return lattice_to_owned_; }

    /// Unwrapped corner coordinates of triangle t (fundamental-cell representative).
    std::array<Vec2, 3> corner_coords(int t) const;

    /// Constant affine geometry shared by all elements of one kind.
    const Eigen::Matrix2d& jacobian(TriKind k) const {
        return jac_[static_cast<int>(k)];
    }
    const Eigen::Matrix2d& inv_jacobian_T(TriKind k) const {
        return inv_jac_t_[static_cast<int>(k)];
    }
    double abs_det() const { return abs_det_; }

private:
    friend MeshTopology build_periodic_uniform_mesh(int, double);

    int n_side_ = 0;
    double period_L_ = 0.0;
    double cell_size_ = 0.0;
    double h_ = 0.0;
    double abs_det_ = 0.0;
    std::vector<Vec2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<int> lattice_to_owned_;
    std::array<Eigen::Matrix2d, 2> jac_;
    std::array<Eigen::Matrix2d, 2> inv_jac_t_;
};

/// Build the n_side x n_side periodic lattice mesh on (0, period_L)^2.
/// Requires n_side >= 2: below that the periodic P2 edge identification
/// degenerates (an edge would coincide with its own periodic image).
MeshTopology build_periodic_uniform_mesh(int n_side, double period_L);

struct RefMap {
    Vec2 point;               ///< physical image of the reference point
    Eigen::Matrix2d jacobian; ///< d(phys)/d(ref)
    double abs_det;           ///< |det J| = 2 * triangle area
};

/// Affine map from the reference triangle (0,0),(1,0),(0,1) into triangle t.
RefMap reference_map(const MeshTopology& mesh, int tri_index, Vec2 ref_point);

struct PointLocation {
    int tri = -1;
    Vec2 ref{0.0, 0.0};
};

/// Wrap p into [0,L)^2 and locate the containing triangle. Points within
/// 1e-12 (relative to the cell size) of a cell or diagonal boundary are
/// tie-broken toward the lower-index cell / first-listed triangle.
PointLocation locate_point(const MeshTopology& mesh, Vec2 p);

/// Plain-text debug dump: `v x y` rows then `t i j k` rows.
void dump_mesh(const MeshTopology& mesh, std::ostream& os);

} // namespace snsfem
