#include "snsfem/noise.hpp"

#include <cmath>

#include "snsfem/error.hpp"

namespace snsfem {

namespace {

// Philox 4x32-10 (Salmon et al., SC 2011).
constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

struct U32x4 {
    std::uint32_t v[4];
};

U32x4 philox4x32(U32x4 ctr, std::uint32_t key0, std::uint32_t key1) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mul_hi_lo(kPhiloxM4x32A, ctr.v[0], lo0, hi0);
        mul_hi_lo(kPhiloxM4x32B, ctr.v[2], lo1, hi1);
        const U32x4 next{{hi1 ^ ctr.v[1] ^ key0, lo1, hi0 ^ ctr.v[3] ^ key1, lo0}};
        ctr = next;
        key0 += kPhiloxW32A;
        key1 += kPhiloxW32B;
    }
    return ctr;
}

// Box-Muller on two 32-bit words; offsets keep the uniforms inside (0,1).
inline double normal_from_u32(std::uint32_t a, std::uint32_t b) {
    constexpr double kScale = 1.0 / 4294967296.0; // 2^-32
    const double u1 = (static_cast<double>(a) + 0.5) * kScale;
    const double u2 = (static_cast<double>(b) + 0.5) * kScale;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace

double NoiseSpec::mode_value(int j, int k, Vec2 p) const {
    const double sx = std::sin(j * M_PI * p[0] / period_L);
    const double sy = std::sin(k * M_PI * p[1] / period_L);
    return amplitude * sx * sy;
}

WienerPath::WienerPath(std::uint64_t master_seed, std::uint64_t path_index, int n_steps_fine,
                       double dt_fine)
    : master_seed_(master_seed), path_index_(path_index), n_steps_fine_(n_steps_fine),
      dt_fine_(dt_fine) {
    SNSFEM_REQUIRE(n_steps_fine >= 1, "WienerPath: n_steps_fine must be >= 1");
    SNSFEM_REQUIRE(dt_fine > 0.0, "WienerPath: dt_fine must be positive");
}

double WienerPath::gaussian(int step, int j, int k, int component) const {
    // Counter layout: (step, mode-and-component, path lo, path hi); key from
    // the master seed. One normal per counter.
    const std::uint32_t mode =
        static_cast<std::uint32_t>((component << 24) | ((j - 1) << 12) | (k - 1));
    const U32x4 ctr{{static_cast<std::uint32_t>(step), mode,
                     static_cast<std::uint32_t>(path_index_),
                     static_cast<std::uint32_t>(path_index_ >> 32)}};
    const U32x4 out = philox4x32(ctr, static_cast<std::uint32_t>(master_seed_),
                                 static_cast<std::uint32_t>(master_seed_ >> 32));
    return normal_from_u32(out.v[0], out.v[1]);
}

Eigen::VectorXd WienerPath::increment_coeffs(const NoiseSpec& spec, int level, int step,
                                             int component) const {
    SNSFEM_REQUIRE(level >= 1, "increment_coeffs: level must be >= 1");
    SNSFEM_REQUIRE(n_steps_fine_ % level == 0,
                   "increment_coeffs: level must divide the fine step count");
    const int n_coarse = n_steps_fine_ / level;
    SNSFEM_REQUIRE(step >= 0 && step < n_coarse, "increment_coeffs: step out of range");

    const int m = spec.modes_per_axis;
    if (level == 1) {
        Eigen::VectorXd c(m * m);
        for (int j = 1; j <= m; ++j) {
            const double base = dt_fine_;
            for (int k = 1; k <= m; ++k) {
                c[(j - 1) * m + (k - 1)] =
                    std::sqrt(base * spec.lambda(j, k)) * gaussian(step, j, k, component);
            }
        }
        return c;
    }
    if (level % 2 == 0) {
        // Pairwise tree: the level-c sum is bitwise the sum of its two
        // level-c/2 halves, which is what makes coupled refinements exact.
        return increment_coeffs(spec, level / 2, 2 * step, component) +
               increment_coeffs(spec, level / 2, 2 * step + 1, component);
    }
    Eigen::VectorXd acc = increment_coeffs(spec, 1, step * level, component);
    for (int i = 1; i < level; ++i) {
        acc += increment_coeffs(spec, 1, step * level + i, component);
    }
    return acc;
}

double IncrementField::eval(Vec2 p, int component) const {
    const int m = spec.modes_per_axis;
    const Eigen::VectorXd& c = coeffs[spec.vector_valued ? static_cast<std::size_t>(component) : 0];
    double acc = 0.0;
    for (int j = 1; j <= m; ++j) {
        const double sx = std::sin(j * M_PI * p[0] / spec.period_L);
        for (int k = 1; k <= m; ++k) {
            const double sy = std::sin(k * M_PI * p[1] / spec.period_L);
            acc += c[(j - 1) * m + (k - 1)] * sx * sy;
        }
    }
    return spec.amplitude * acc;
}

IncrementField increment_field(const WienerPath& path, const NoiseSpec& spec, int step,
                               int level) {
    IncrementField f;
    f.spec = spec;
    f.dt = level * path.dt_fine();
    f.coeffs[0] = path.increment_coeffs(spec, level, step, 0);
    if (spec.vector_valued) {
        f.coeffs[1] = path.increment_coeffs(spec, level, step, 1);
    }
    return f;
}

ModeTable::ModeTable(const AssemblyContext& ctx, const NoiseSpec& spec)
    : m_(spec.modes_per_axis), n_points_(static_cast<int>(ctx.physical_points().size())),
      amplitude_(spec.amplitude) {
    sin_x_.resize(n_points_, m_);
    sin_y_.resize(n_points_, m_);
    const double scale = M_PI / spec.period_L;
    for (int p = 0; p < n_points_; ++p) {
        const Vec2 x = ctx.physical_points()[static_cast<std::size_t>(p)];
        for (int j = 1; j <= m_; ++j) {
            sin_x_(p, j - 1) = std::sin(j * scale * x[0]);
            sin_y_(p, j - 1) = std::sin(j * scale * x[1]);
        }
    }
}

void ModeTable::eval(const Eigen::VectorXd& coeffs, Eigen::VectorXd& dw) const {
    dw.resize(n_points_);
    // Column-major map of the row-major-in-j coefficient lattice: c(k-1, j-1).
    Eigen::Map<const Eigen::MatrixXd> c(coeffs.data(), m_, m_);
    Eigen::VectorXd tmp(m_);
    for (int p = 0; p < n_points_; ++p) {
        tmp.noalias() = c * sin_x_.row(p).transpose(); // tmp[k-1] = sum_j coeff_{j,k} sx[j]
        dw[p] = amplitude_ * sin_y_.row(p).dot(tmp);
    }
}

Eigen::VectorXd noise_load_vector(const AssemblyContext& ctx, const DofMap& velocity,
                                  const DiffusionOperator& diffusion,
                                  const FieldCoefficients& u_prev,
                                  const IncrementField& dw) {
    SNSFEM_REQUIRE(velocity.space == SpaceKind::VelocityP2Vector,
                   "noise_load_vector: velocity space expected");
    const MeshTopology& mesh = ctx.mesh();
    const int nq = ctx.n_qp();
    const int stride = velocity.component_stride;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(velocity.n_global());

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& dofs = velocity.cell_dofs[static_cast<std::size_t>(t)];
        double acc[2][6] = {};
        for (int q = 0; q < nq; ++q) {
            double uv[2] = {0.0, 0.0};
            for (int a = 0; a < 6; ++a) {
                const double val = ctx.p2_value(q, a);
                uv[0] += u_prev.values[dofs[static_cast<std::size_t>(a)]] * val;
                uv[1] += u_prev.values[stride + dofs[static_cast<std::size_t>(a)]] * val;
            }
            const Vec2 g = diffusion.apply(Vec2{uv[0], uv[1]});
            const Vec2 x = ctx.physical_point(t, q);
            double noise[2];
            if (dw.spec.vector_valued) {
                noise[0] = g[0] * dw.eval(x, 0);
                noise[1] = g[1] * dw.eval(x, 1);
            } else {
                const double w = dw.eval(x, 0);
                noise[0] = g[0] * w;
                noise[1] = g[1] * w;
            }
            const double scale = ctx.weight_times_det(q);
            for (int a = 0; a < 6; ++a) {
                const double val = scale * ctx.p2_value(q, a);
                acc[0][a] += noise[0] * val;
                acc[1][a] += noise[1] * val;
            }
        }
        for (int a = 0; a < 6; ++a) {
            out[dofs[static_cast<std::size_t>(a)]] += acc[0][a];
            out[stride + dofs[static_cast<std::size_t>(a)]] += acc[1][a];
        }
    }
    return out;
}

} // namespace snsfem
