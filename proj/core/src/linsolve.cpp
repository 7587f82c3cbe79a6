#include "snsfem/linsolve.hpp"

#include <vector>

#include "snsfem/error.hpp"

namespace snsfem {

SparseFactor::SparseFactor(const SparseOperator& op, std::string block_name)
    : matrix_(op), block_name_(std::move(block_name)) {
    SNSFEM_REQUIRE(op.rows() == op.cols(), "SparseFactor: matrix must be square");
    matrix_.makeCompressed();
    lu_.compute(matrix_);
    if (lu_.info() != Eigen::Success) {
        throw SolveError("sparse LU factorization failed (singular " + block_name_ + ")",
                         std::numeric_limits<double>::infinity(), block_name_);
    }
}

Eigen::VectorXd SparseFactor::solve_unchecked(const Eigen::VectorXd& rhs) const {
    return lu_.solve(rhs);
}

Eigen::VectorXd SparseFactor::solve(const Eigen::VectorXd& rhs, double tol) const {
    Eigen::VectorXd x = lu_.solve(rhs);
    const double rhs_norm = rhs.norm();
    const double res = (matrix_ * x - rhs).norm();
    if (rhs_norm > 0.0 ? res > tol * rhs_norm : res > tol) {
        throw SolveError("linear solve on " + block_name_ + " missed tolerance (residual " +
                             std::to_string(res) + ", rhs norm " + std::to_string(rhs_norm) + ")",
                         res, block_name_);
    }
    return x;
}

Eigen::VectorXd solve_spd(const SparseOperator& op, const Eigen::VectorXd& rhs, double tol) {
    SparseFactor factor(op, "spd block");
    return factor.solve(rhs, tol);
}

PinnedPoissonSolver::PinnedPoissonSolver(const SparseOperator& stiffness,
                                         const Eigen::VectorXd& mean)
    : stiffness_(&stiffness), n_(static_cast<int>(stiffness.rows())) {
    SNSFEM_REQUIRE(mean.size() == stiffness.rows(),
                   "PinnedPoissonSolver: mean vector size mismatch");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(stiffness.nonZeros()) + 2 * static_cast<std::size_t>(n_));
    for (int i = 0; i < stiffness.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(stiffness, i); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    for (int i = 0; i < n_; ++i) {
        trips.emplace_back(i, n_, mean[i]);
        trips.emplace_back(n_, i, mean[i]);
    }
    SparseOperator grand(n_ + 1, n_ + 1);
    grand.setFromTriplets(trips.begin(), trips.end());
    factor_ = std::make_unique<SparseFactor>(grand, "pinned Poisson");
}

Eigen::VectorXd PinnedPoissonSolver::solve(const Eigen::VectorXd& rhs, double tol) const {
    SNSFEM_REQUIRE(rhs.size() == n_, "PinnedPoissonSolver: rhs size mismatch");
    Eigen::VectorXd padded(n_ + 1);
    padded.head(n_) = rhs;
    padded[n_] = 0.0;
    Eigen::VectorXd x = factor_->solve(padded, tol);
    return x.head(n_);
}

double PinnedPoissonSolver::residual(const Eigen::VectorXd& x, const Eigen::VectorXd& rhs) const {
    // Relative where the data has scale; absolute at the roundoff floor
    // (an exactly-cancelling right-hand side would otherwise divide by noise).
    const double scale = rhs.norm();
    const double res = (*stiffness_ * x - rhs).norm();
    return scale > 1e-14 * (1.0 + x.norm()) ? res / scale : res;
}

namespace {

SparseOperator build_saddle_matrix(const SparseOperator& a, const SparseOperator& b,
                                   const Eigen::VectorXd& mean, double bt_scale) {
    const int n_u = static_cast<int>(a.rows());
    const int n_p = static_cast<int>(b.rows());
    SNSFEM_REQUIRE(b.cols() == n_u, "saddle system: B block shape mismatch");
    SNSFEM_REQUIRE(mean.size() == n_p, "saddle system: mean row size mismatch");
    const int n = n_u + n_p + 1;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros()) + 2 * static_cast<std::size_t>(b.nonZeros()) +
                  2 * static_cast<std::size_t>(n_p));
    for (int i = 0; i < a.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(a, i); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    for (int i = 0; i < b.outerSize(); ++i) {
        for (SparseOperator::InnerIterator it(b, i); it; ++it) {
            const int p = static_cast<int>(it.row());
            const int v = static_cast<int>(it.col());
            trips.emplace_back(n_u + p, v, it.value());               // divergence rows
            trips.emplace_back(v, n_u + p, -bt_scale * it.value());   // -bt_scale B^T
        }
    }
    for (int p = 0; p < n_p; ++p) {
        trips.emplace_back(n_u + p, n_u + n_p, mean[p]);
        trips.emplace_back(n_u + n_p, n_u + p, mean[p]);
    }
    SparseOperator grand(n, n);
    grand.setFromTriplets(trips.begin(), trips.end());
    return grand;
}

} // namespace

SaddleFactor::SaddleFactor(const SparseOperator& a_block, const SparseOperator& b_block,
                           const Eigen::VectorXd& mean_row, double bt_scale)
    : n_u_(static_cast<int>(a_block.rows())), n_p_(static_cast<int>(b_block.rows())) {
    factor_ = std::make_unique<SparseFactor>(
        build_saddle_matrix(a_block, b_block, mean_row, bt_scale), "saddle system");
}

void SaddleFactor::solve(const Eigen::VectorXd& rhs_u, Eigen::VectorXd& u,
                         Eigen::VectorXd& r) const {
    SNSFEM_REQUIRE(rhs_u.size() == n_u_, "SaddleFactor: rhs size mismatch");
    Eigen::VectorXd stacked = Eigen::VectorXd::Zero(n_u_ + n_p_ + 1);
    stacked.head(n_u_) = rhs_u;
    Eigen::VectorXd x = factor_->solve_unchecked(stacked);
    u = x.head(n_u_);
    r = x.segment(n_u_, n_p_);
}

SaddleSolution solve_saddle(const SaddleSystem& sys, double tol) {
    SNSFEM_REQUIRE(sys.a_block && sys.b_block, "solve_saddle: missing blocks");
    const SparseOperator grand =
        build_saddle_matrix(*sys.a_block, *sys.b_block, sys.mean_row, sys.bt_scale);
    const int n_u = static_cast<int>(sys.a_block->rows());
    const int n_p = static_cast<int>(sys.b_block->rows());
    SNSFEM_REQUIRE(sys.rhs.size() == n_u, "solve_saddle: rhs must cover velocity dofs");

    Eigen::VectorXd stacked = Eigen::VectorXd::Zero(n_u + n_p + 1);
    stacked.head(n_u) = sys.rhs;

    SparseFactor factor(grand, "saddle system");
    Eigen::VectorXd x = factor.solve_unchecked(stacked);

    const double rhs_norm = stacked.norm();
    const double res = (grand * x - stacked).norm();
    if (rhs_norm > 0.0 ? res > tol * rhs_norm : res > tol) {
        throw SolveError("saddle solve missed tolerance (residual " + std::to_string(res) + ")",
                         res, "saddle system");
    }

    SaddleSolution out;
    out.velocity = x.head(n_u);
    out.pressure = x.segment(n_u, n_p);
    out.residual = rhs_norm > 0.0 ? res / rhs_norm : res;
    const double mean = sys.mean_row.dot(out.pressure);
    if (std::abs(mean) > tol * std::max(1.0, out.pressure.norm())) {
        throw SolveError("saddle solve returned non-zero pressure mean", std::abs(mean),
                         "pressure mean");
    }
    return out;
}

} // namespace snsfem
