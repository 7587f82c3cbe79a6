#include <benchmark/benchmark.h>

#include <random>

#include "snsfem/experiments.hpp"
#include "snsfem/stepper.hpp"

using namespace snsfem;

namespace {

FieldCoefficients random_field(const DofMap& map, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    FieldCoefficients f = zero_field(map);
    for (int i = 0; i < f.values.size(); ++i) f.values[i] = unif(gen);
    return f;
}

void BM_AssembleMassP2(benchmark::State& state) {
    const MeshTopology mesh = build_periodic_uniform_mesh(static_cast<int>(state.range(0)), 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble_mass(mesh, vmap));
    }
    state.SetItemsProcessed(state.iterations() * mesh.n_triangles());
}
BENCHMARK(BM_AssembleMassP2)->Arg(16)->Arg(32)->Arg(64);

void BM_TrilinearApply(benchmark::State& state) {
    const MeshTopology mesh = build_periodic_uniform_mesh(static_cast<int>(state.range(0)), 1.0);
    const DofMap vmap = build_dof_map(mesh, SpaceKind::VelocityP2Vector);
    const AssemblyContext ctx(mesh, 6);
    const FieldCoefficients w = random_field(vmap, 1);
    const FieldCoefficients u = random_field(vmap, 2);
    Eigen::VectorXd out;
    for (auto _ : state) {
        apply_trilinear(ctx, vmap, w.values, u.values, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * mesh.n_triangles());
}
BENCHMARK(BM_TrilinearApply)->Arg(16)->Arg(32)->Arg(64);

void BM_IncrementCoefficients(benchmark::State& state) {
    const NoiseSpec spec{};
    const WienerPath path(1, 0, 256, 1.0 / 256.0);
    const int level = static_cast<int>(state.range(0));
    int step = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(path.increment_coeffs(spec, level, step));
        step = (step + 1) % (256 / level);
    }
}
BENCHMARK(BM_IncrementCoefficients)->Arg(1)->Arg(8)->Arg(32);

void BM_StepAdvance(benchmark::State& state) {
    SchemeConfig cfg;
    cfg.n_side = static_cast<int>(state.range(0));
    cfg.n_steps = 64;
    Stepper stepper(cfg);
    const WienerPath path(9, 0, cfg.n_steps, cfg.dt());
    StepState s = stepper.zero_state();
    for (auto _ : state) {
        if (s.n == cfg.n_steps) s = stepper.zero_state();
        stepper.advance(s, path);
    }
}
BENCHMARK(BM_StepAdvance)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_HelmholtzSolve(benchmark::State& state) {
    const MeshTopology mesh = build_periodic_uniform_mesh(static_cast<int>(state.range(0)), 1.0);
    const DofMap smap = build_dof_map(mesh, SpaceKind::PotentialP1Scalar);
    const AssemblyContext ctx(mesh, 6);
    const HelmholtzSolver solver(ctx, smap);
    auto field = [](int, Vec2 x) {
        return Vec2{std::sin(2.0 * M_PI * x[1]), std::cos(2.0 * M_PI * x[0])};
    };
    const Eigen::VectorXd rhs = solver.assemble_gradient_rhs(field);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver.solve_potential(rhs, 1e-10));
    }
}
BENCHMARK(BM_HelmholtzSolve)->Arg(32)->Arg(64);

} // namespace

BENCHMARK_MAIN();
