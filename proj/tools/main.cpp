// Command-line driver: run-path | convergence-time | convergence-space |
// deterministic-verify | diagnostics. Each subcommand writes CSV (and
// optional SVG) plus the resolved config into the output directory; output
// is byte-deterministic for a fixed config in serial mode.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snsfem/error.hpp"
#include "snsfem/experiments.hpp"
#include "snsfem/report.hpp"
#include "snsfem/run_config.hpp"

namespace fs = std::filesystem;
using namespace snsfem;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    int paths = -1;
    int parallel = -1;
    int steps = -1;
    int nside = -1;
    double epsilon = -1.0;
    std::vector<int> levels;
    bool svg = false;
    bool full_scale = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "TOML-style config file");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--paths", flags.paths, "Monte Carlo path count");
    cmd->add_option("--parallel", flags.parallel, "worker threads (0 = hardware)");
    cmd->add_flag("--svg", flags.svg, "also emit SVG log-log plots");
    cmd->add_flag("--full-scale", flags.full_scale,
                  "use the headline configuration (1200 paths, h=2^-7, k=2^-9)");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = parse_config_file(flags.config_path);
    }
    if (flags.seed >= 0) cfg.study.master_seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.paths >= 0) cfg.study.n_paths = flags.paths;
    if (flags.parallel >= 0) cfg.study.parallel = flags.parallel;
    if (flags.steps >= 0) cfg.scheme.n_steps = flags.steps;
    if (flags.nside >= 0) cfg.scheme.n_side = flags.nside;
    if (flags.epsilon >= 0.0) cfg.study.epsilon = flags.epsilon;
    if (flags.svg) cfg.study.svg = true;
    if (flags.full_scale && !cfg.study.full_scale) {
        cfg.study.full_scale = true;
        cfg.apply_full_scale();
    }
    cfg.validate();
    return cfg;
}

fs::path prepare_out_dir(const CommonFlags& flags, const std::string& subcommand) {
    fs::path dir;
    if (!flags.out_dir.empty()) {
        dir = flags.out_dir;
    } else {
        const char* root = std::getenv("SNSFEM_OUT_ROOT");
        dir = fs::path(root ? root : "runs") / subcommand;
    }
    fs::create_directories(dir);
    return dir;
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
    std::ofstream out(dir / "config.toml", std::ios::binary);
    write_config(cfg, out);
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

void emit_table(const ErrorTable& table, const RateFits& fits, const RunConfig& cfg,
                const fs::path& dir, const std::string& x_label) {
    std::ostringstream csv;
    write_error_table_csv(table, csv);
    write_file(dir / "errors.csv", csv.str());

    std::ostringstream rates;
    write_rates_csv(table, fits, rates);
    write_file(dir / "rates.csv", rates.str());

    if (cfg.study.svg) {
        std::vector<SvgSeries> series(3);
        series[0].label = "EAu";
        series[1].label = "EBu";
        series[2].label = "Ep";
        for (const LevelEstimate& row : table.rows) {
            series[0].x.push_back(row.level);
            series[0].y.push_back(row.eau);
            series[1].x.push_back(row.level);
            series[1].y.push_back(row.ebu);
            series[2].x.push_back(row.level);
            series[2].y.push_back(row.ep);
        }
        std::ostringstream svg;
        write_svg_loglog("strong errors", x_label, series, svg);
        write_file(dir / "errors.svg", svg.str());
    }
}

int fail_with(const std::string& kind, const std::string& message) {
    std::cerr << "{\"error\":\"" << kind << "\",\"message\":\"" << message << "\"}\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed finite element solver for the 2D periodic stochastic "
                 "Navier-Stokes equations with multiplicative noise"};
    app.require_subcommand(1);

    CommonFlags run_flags, time_flags, space_flags, det_flags, diag_flags;
    std::string dump_mesh_path;
    double kappa0 = -1.0, kappa = -1.0;

    CLI::App* cmd_run = app.add_subcommand("run-path", "simulate one path and dump trajectory CSV");
    add_common(cmd_run, run_flags);
    cmd_run->add_option("--steps", run_flags.steps, "number of time steps");
    cmd_run->add_option("--nside", run_flags.nside, "cells per side");
    cmd_run->add_option("--dump-mesh", dump_mesh_path, "write a plain-text mesh dump");

    CLI::App* cmd_time =
        app.add_subcommand("convergence-time", "coupled-path time convergence study");
    add_common(cmd_time, time_flags);
    cmd_time->add_option("--levels", time_flags.levels, "step counts per level (k = T/N)");
    cmd_time->add_option("--nside", time_flags.nside, "cells per side");

    CLI::App* cmd_space =
        app.add_subcommand("convergence-space", "coupled-path space convergence study");
    add_common(cmd_space, space_flags);
    cmd_space->add_option("--levels", space_flags.levels, "n_side per level");
    cmd_space->add_option("--steps", space_flags.steps, "number of time steps (fixed k)");

    CLI::App* cmd_det = app.add_subcommand("deterministic-verify",
                                           "manufactured-solution order verification");
    add_common(cmd_det, det_flags);
    cmd_det->add_option("--levels", det_flags.levels, "mesh levels (n_side list)");

    CLI::App* cmd_diag = app.add_subcommand("diagnostics", "sample-set indicator fractions");
    add_common(cmd_diag, diag_flags);
    cmd_diag->add_option("--epsilon", diag_flags.epsilon, "epsilon of the sample sets");
    cmd_diag->add_option("--kappa0", kappa0, "kappa0 of the L2 error set");
    cmd_diag->add_option("--kappa", kappa, "kappa of the H1 error set");
    cmd_diag->add_option("--steps", diag_flags.steps, "number of time steps");
    cmd_diag->add_option("--nside", diag_flags.nside, "cells per side");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            const RunConfig cfg = resolve_config(run_flags);
            const fs::path dir = prepare_out_dir(run_flags, "run-path");
            echo_config(cfg, dir);
            Stepper stepper(cfg.scheme);
            if (!dump_mesh_path.empty()) {
                std::ofstream mesh_out(dump_mesh_path, std::ios::binary);
                dump_mesh(stepper.mesh(), mesh_out);
            }
            const WienerPath path(cfg.study.master_seed, 0, cfg.scheme.n_steps,
                                  cfg.scheme.dt());
            const PathSummary summary = stepper.run_path(path);
            std::ostringstream csv, stats;
            write_path_summary_csv(summary, cfg.scheme.dt(), csv);
            write_path_stats_csv(summary, stats);
            write_file(dir / "summary.csv", csv.str());
            write_file(dir / "stats.csv", stats.str());
            std::cout << "run-path: " << summary.n_steps << " steps, final |u| = "
                      << format_double(summary.u_l2_history.back()) << ", wrote "
                      << (dir / "summary.csv").string() << "\n";
            return 0;
        }
        if (cmd_time->parsed()) {
            RunConfig cfg = resolve_config(time_flags);
            if (!time_flags.levels.empty()) cfg.study.k_levels = time_flags.levels;
            cfg.validate();
            const fs::path dir = prepare_out_dir(time_flags, "convergence-time");
            echo_config(cfg, dir);
            const ErrorTable table =
                time_convergence_study(cfg.scheme, cfg.study.k_levels, cfg.study.n_paths,
                                       cfg.study.master_seed, cfg.resolved_threads());
            const RateFits fits = fit_rate(table);
            emit_table(table, fits, cfg, dir, "k");
            std::cout << "convergence-time: EAu slope "
                      << (fits.eau.valid ? format_double(fits.eau.slope) : fits.eau.note)
                      << ", Ep slope "
                      << (fits.ep.valid ? format_double(fits.ep.slope) : fits.ep.note)
                      << ", failures " << table.failed_paths << "\n";
            return 0;
        }
        if (cmd_space->parsed()) {
            RunConfig cfg = resolve_config(space_flags);
            if (!space_flags.levels.empty()) cfg.study.h_levels = space_flags.levels;
            cfg.validate();
            const fs::path dir = prepare_out_dir(space_flags, "convergence-space");
            echo_config(cfg, dir);
            const ErrorTable table =
                space_convergence_study(cfg.scheme, cfg.study.h_levels, cfg.study.n_paths,
                                        cfg.study.master_seed, cfg.resolved_threads());
            const RateFits fits = fit_rate(table);
            emit_table(table, fits, cfg, dir, "h");
            std::cout << "convergence-space: EAu slope "
                      << (fits.eau.valid ? format_double(fits.eau.slope) : fits.eau.note)
                      << ", EBu slope "
                      << (fits.ebu.valid ? format_double(fits.ebu.slope) : fits.ebu.note)
                      << ", Ep slope "
                      << (fits.ep.valid ? format_double(fits.ep.slope) : fits.ep.note)
                      << ", failures " << table.failed_paths << "\n";
            return 0;
        }
        if (cmd_det->parsed()) {
            const RunConfig cfg = resolve_config(det_flags);
            const fs::path dir = prepare_out_dir(det_flags, "deterministic-verify");
            echo_config(cfg, dir);
            std::vector<int> levels = det_flags.levels;
            if (levels.empty()) levels = {8, 16, 32};
            const DeterministicVerifyReport report =
                deterministic_verify(cfg.scheme.nu, levels, 1e-12);
            std::ostringstream csv;
            write_deterministic_csv(report, csv);
            write_file(dir / "deterministic.csv", csv.str());
            std::cout << "deterministic-verify: L2 order " << format_double(report.order_u_l2.slope)
                      << ", H1 order " << format_double(report.order_u_h1.slope)
                      << ", pressure order " << format_double(report.order_p_l2.slope)
                      << (report.within_bands ? " (within bands)" : " (OUT OF BANDS)") << "\n";
            return report.within_bands ? 0 : 2;
        }
        if (cmd_diag->parsed()) {
            RunConfig cfg = resolve_config(diag_flags);
            if (kappa0 >= 0.0) cfg.study.kappa0 = kappa0;
            if (kappa >= 0.0) cfg.study.kappa = kappa;
            if (diag_flags.epsilon >= 0.0) cfg.study.epsilon = diag_flags.epsilon;
            const fs::path dir = prepare_out_dir(diag_flags, "diagnostics");
            echo_config(cfg, dir);
            const IndicatorStudyResult result =
                indicator_study(cfg.scheme, cfg.study.n_paths, cfg.study.master_seed,
                                cfg.study.epsilon, cfg.study.kappa0, cfg.study.kappa,
                                cfg.resolved_threads());
            std::ostringstream csv;
            write_indicator_csv(result, cfg.study.epsilon, cfg.study.kappa0, cfg.study.kappa, csv);
            write_file(dir / "indicators.csv", csv.str());
            std::cout << "diagnostics: omega_k " << format_double(result.fractions.omega_k)
                      << ", omega_h " << format_double(result.fractions.omega_h) << " over "
                      << result.n_paths << " paths\n";
            return 0;
        }
    } catch (const InvalidArgument& e) {
        return fail_with("invalid_argument", e.what());
    } catch (const PicardError& e) {
        return fail_with("picard_divergence", e.what());
    } catch (const SolveError& e) {
        return fail_with("solver_failure", e.what());
    } catch (const std::exception& e) {
        return fail_with("runtime_error", e.what());
    }
    return 0;
}
