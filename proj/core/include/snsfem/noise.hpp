#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "snsfem/assembly.hpp"
#include "snsfem/mesh.hpp"
#include "snsfem/spaces.hpp"

namespace snsfem {

/// Truncated Q-Wiener spectrum: lambda_{j,k} = 1/(j^2+k^2) on modes
/// g_{j,k}(x,y) = amplitude * sin(j pi x) sin(k pi y), 1 <= j,k <= M.
/// The modes vanish on the seam lines, so the field is continuous on the
/// torus but has derivative kinks there for odd j,k; the kinks lie on mesh
/// lines of every lattice mesh.
struct NoiseSpec {
    int modes_per_axis = 10; ///< M
    double amplitude = 5.0;
    double period_L = 1.0;
    /// Independent coefficient lattice per velocity component instead of one
    /// scalar field multiplying G(u).
    bool vector_valued = false;

    double lambda(int j, int k) const { return 1.0 / double(j * j + k * k); }
    int n_modes() const { return modes_per_axis * modes_per_axis; }
    double mode_value(int j, int k, Vec2 p) const;
};

/// Diffusion operator G mapping a velocity value to a noise amplitude.
struct DiffusionOperator {
    enum class Kind { SqrtOnePlusSquare, Constant, Zero };
    Kind kind = Kind::SqrtOnePlusSquare;
    Vec2 constant_value{0.0, 0.0};
    double lipschitz_bound = 1.0;

    Vec2 apply(Vec2 u) const {
        switch (kind) {
        case Kind::SqrtOnePlusSquare:
            return Vec2{std::sqrt(u[0] * u[0] + 1.0), std::sqrt(u[1] * u[1] + 1.0)};
        case Kind::Constant:
            return constant_value;
        case Kind::Zero:
            return Vec2::Zero();
        }
        return Vec2::Zero();
    }

    static DiffusionOperator sqrt_one_plus_square() { return DiffusionOperator{}; }
    static DiffusionOperator constant(Vec2 v) {
        return DiffusionOperator{Kind::Constant, v, 0.0};
    }
    static DiffusionOperator zero() { return DiffusionOperator{Kind::Zero, Vec2::Zero(), 0.0}; }
};

inline Vec2 apply_G(const DiffusionOperator& g, Vec2 u) { return g.apply(u); }

/// Seeded lattice of Gaussian increments xi^n_{j,k}. Increments are drawn by
/// a counter-based generator keyed on (master_seed, path_index, step, mode),
/// so every value is reproducible independent of evaluation order and no
/// path storage is needed. Coarsened increments are pairwise sums of the
/// fine coefficients: the level-2c coefficient over step s is exactly
/// level-c(2s) + level-c(2s+1), bitwise.
class WienerPath {
public:
    WienerPath(std::uint64_t master_seed, std::uint64_t path_index, int n_steps_fine,
               double dt_fine);

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t path_index() const { return path_index_; }
    int n_steps_fine() const { return n_steps_fine_; }
    double dt_fine() const { return dt_fine_; }

    /// Standard normal draw xi^step_{j,k} (1-based modes, component for the
    /// vector-valued reading).
    double gaussian(int step, int j, int k, int component = 0) const;

    /// Coefficients of g_{j,k} in the increment over coarse step `step` at
    /// coarsening factor `level` (row-major in j, then k). Each fine-level
    /// coefficient is sqrt(dt_fine * lambda_{j,k}) * xi.
    Eigen::VectorXd increment_coeffs(const NoiseSpec& spec, int level, int step,
                                     int component = 0) const;

private:
    std::uint64_t master_seed_;
    std::uint64_t path_index_;
    int n_steps_fine_;
    double dt_fine_;
};

/// Pointwise-evaluable increment field Delta W for one step. For the
/// vector-valued reading, the field carries one coefficient lattice per
/// component.
struct IncrementField {
    NoiseSpec spec;
    double dt = 0.0;                ///< level * dt_fine
    std::array<Eigen::VectorXd, 2> coeffs; ///< [component]; scalar noise uses [0]

    double eval(Vec2 p, int component = 0) const;
};

IncrementField increment_field(const WienerPath& path, const NoiseSpec& spec, int step,
                               int level);

/// Per-mesh sine tables at the quadrature points of a context, so that
/// evaluating Delta W at every quadrature point is one small mat-vec per
/// point instead of M^2 transcendentals.
class ModeTable {
public:
    ModeTable(const AssemblyContext& ctx, const NoiseSpec& spec);

    /// dw[p] = sum_{j,k} coeffs[(j-1)*M + (k-1)] * g_{j,k}(x_p) over all
    /// element-quadrature points p.
    void eval(const Eigen::VectorXd& coeffs, Eigen::VectorXd& dw) const;

    int n_points() const { return n_points_; }

private:
    int m_;
    int n_points_;
    double amplitude_;
    Eigen::MatrixXd sin_x_; // n_points x M
    Eigen::MatrixXd sin_y_; // n_points x M
};

/// Load vector (G(u_prev) DeltaW, v) over the velocity test space; the eta
/// correction (gradient part subtraction) is applied by the helmholtz module.
Eigen::VectorXd noise_load_vector(const AssemblyContext& ctx, const DofMap& velocity,
                                  const DiffusionOperator& diffusion,
                                  const FieldCoefficients& u_prev,
                                  const IncrementField& dw);

} // namespace snsfem
