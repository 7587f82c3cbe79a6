#pragma once

#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "snsfem/assembly.hpp"

namespace snsfem {

/// Sparse direct LU factorization with a verified-residual solve. The
/// factorization is immutable after construction; solves are const and may
/// run concurrently from one thread each.
class SparseFactor {
public:
    explicit SparseFactor(const SparseOperator& op, std::string block_name = "operator");

    /// Solve op x = rhs; throws SolveError if the relative residual exceeds tol.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double tol = 1e-10) const;

    /// Solve without the residual check (caller verifies).
    Eigen::VectorXd solve_unchecked(const Eigen::VectorXd& rhs) const;

    int rows() const { return static_cast<int>(matrix_.rows()); }

private:
    Eigen::SparseMatrix<double> matrix_; // column-major copy kept for residuals
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    std::string block_name_;
};

/// One-shot SPD (or pinned-SPD) solve with residual verification.
Eigen::VectorXd solve_spd(const SparseOperator& op, const Eigen::VectorXd& rhs,
                          double tol = 1e-10);

/// Symmetric-indefinite Poisson system with a single zero-mean Lagrange
/// multiplier row/column: [[K, m],[m^T, 0]]. Factorized once, reused across
/// steps and paths.
class PinnedPoissonSolver {
public:
    PinnedPoissonSolver(const SparseOperator& stiffness, const Eigen::VectorXd& mean);

    /// Returns the zero-mean solution of K x = rhs (+ multiplier dropped).
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double tol = 1e-10) const;

    /// Relative residual ||K x - rhs|| / ||rhs|| of a candidate solution.
    double residual(const Eigen::VectorXd& x, const Eigen::VectorXd& rhs) const;

private:
    const SparseOperator* stiffness_;
    int n_;
    std::unique_ptr<SparseFactor> factor_;
};

/// Saddle-point system of one implicit step:
///   [ A      -bt_scale*B^T  0 ] [u]   [rhs_u]
///   [ B       0             m ] [r] = [0]
///   [ 0       m^T           0 ] [mu]  [0]
/// where m is the pressure mean vector. A carries mass + k nu stiffness
/// (+ any linearized convection), B the divergence coupling.
struct SaddleSystem {
    const SparseOperator* a_block = nullptr;
    const SparseOperator* b_block = nullptr;
    Eigen::VectorXd mean_row;
    Eigen::VectorXd rhs; ///< momentum right-hand side (length = velocity dofs)
    double bt_scale = 1.0;
};

struct SaddleSolution {
    Eigen::VectorXd velocity;
    Eigen::VectorXd pressure;
    double residual = 0.0;
};

/// Reusable factorization of the saddle matrix (the A block is fixed at
/// construction; the momentum right-hand side varies per solve).
class SaddleFactor {
public:
    SaddleFactor(const SparseOperator& a_block, const SparseOperator& b_block,
                 const Eigen::VectorXd& mean_row, double bt_scale);

    void solve(const Eigen::VectorXd& rhs_u, Eigen::VectorXd& u, Eigen::VectorXd& r) const;

    int n_velocity() const { return n_u_; }
    int n_pressure() const { return n_p_; }

private:
    int n_u_, n_p_;
    std::unique_ptr<SparseFactor> factor_;
};

/// One-shot saddle solve with verified stacked residual and pressure mean.
SaddleSolution solve_saddle(const SaddleSystem& sys, double tol = 1e-10);

} // namespace snsfem
