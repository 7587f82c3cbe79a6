#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "snsfem/error.hpp"
#include "snsfem/report.hpp"
#include "snsfem/run_config.hpp"

using namespace snsfem;
using Catch::Approx;

TEST_CASE("empty config gives the section-5 defaults at desk scale") {
    const RunConfig cfg = parse_config_text("");
    CHECK(cfg.scheme.nu == 1.0);
    CHECK(cfg.scheme.T == 1.0);
    CHECK(cfg.scheme.noise.modes_per_axis == 10);
    CHECK(cfg.scheme.noise.amplitude == 5.0);
    CHECK(cfg.scheme.n_side == 32);                       // h = 2^-5
    CHECK(cfg.study.k_levels == std::vector<int>({8, 16, 32, 64, 128}));
    CHECK(cfg.study.h_levels == std::vector<int>({4, 8, 16, 32}));
    CHECK(cfg.study.n_paths == 100);
}

TEST_CASE("key parsing, overrides, and unknown keys") {
    const RunConfig cfg = parse_config_text(
        "[scheme]\n"
        "nu = 0.5\n"
        "n_steps = 64   # comment\n"
        "nonlinear = frozen\n"
        "[noise]\n"
        "M = 4\n"
        "vector_valued = true\n"
        "[study]\n"
        "n_paths = 10\n"
        "master_seed = 99\n"
        "k_levels = 8, 16, 32\n");
    CHECK(cfg.scheme.nu == 0.5);
    CHECK(cfg.scheme.n_steps == 64);
    CHECK(cfg.scheme.nonlinear == NonlinearStrategy::FrozenPicard);
    CHECK(cfg.scheme.noise.modes_per_axis == 4);
    CHECK(cfg.scheme.noise.vector_valued);
    CHECK(cfg.study.n_paths == 10);
    CHECK(cfg.study.master_seed == 99);
    CHECK(cfg.study.k_levels == std::vector<int>({8, 16, 32}));

    CHECK_THROWS_AS(parse_config_text("[scheme]\nbogus = 1\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config_text("[nowhere]\nnu = 1\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config_text("nu = 1\n"), InvalidArgument);
}

TEST_CASE("level validation: dividing k levels, nested h levels") {
    // 8 divides 128: accepted
    CHECK_NOTHROW(parse_config_text("[study]\nk_levels = 8, 128\n"));
    // 12 does not divide 128: rejected
    CHECK_THROWS_AS(parse_config_text("[study]\nk_levels = 12, 128\n"), InvalidArgument);
    // {4, 6} is not nested: rejected
    CHECK_THROWS_AS(parse_config_text("[study]\nh_levels = 4, 6\n"), InvalidArgument);
    // {4, 16} is nested (skip a level): accepted
    CHECK_NOTHROW(parse_config_text("[study]\nh_levels = 4, 16\n"));
}

TEST_CASE("config round trip is exact") {
    RunConfig cfg = parse_config_text("");
    cfg.scheme.nu = 0.123456789012345678;
    cfg.scheme.picard_tol = 3.5e-11;
    cfg.study.master_seed = 0xDEADBEEFull;
    cfg.study.k_levels = {4, 8, 16};
    std::ostringstream os;
    write_config(cfg, os);
    const RunConfig back = parse_config_text(os.str());
    CHECK(back.scheme.nu == cfg.scheme.nu);
    CHECK(back.scheme.picard_tol == cfg.scheme.picard_tol);
    CHECK(back.study.master_seed == cfg.study.master_seed);
    CHECK(back.study.k_levels == cfg.study.k_levels);

    std::ostringstream os2;
    write_config(back, os2);
    CHECK(os.str() == os2.str()); // byte-identical echo
}

TEST_CASE("full-scale switch installs the headline configuration") {
    const RunConfig cfg = parse_config_text("[study]\nfull_scale = true\n");
    CHECK(cfg.study.n_paths == 1200);
    CHECK(cfg.scheme.n_side == 128);
    CHECK(cfg.scheme.n_steps == 512);
}

TEST_CASE("error table and rates CSV shape") {
    ErrorTable table;
    table.axis = ErrorTable::Axis::Time;
    table.n_paths = 4;
    table.master_seed = 5;
    for (double k : {0.25, 0.125, 0.0625}) {
        LevelEstimate row;
        row.level = k;
        row.eau = 0.1 * std::sqrt(k);
        row.ebu = 0.3 * std::sqrt(k);
        row.ep = 0.2 * std::sqrt(k);
        row.n_paths_ok = 4;
        table.rows.push_back(row);
    }
    std::ostringstream os;
    write_error_table_csv(table, os);
    const std::string csv = os.str();
    CHECK(csv.rfind("axis,level,estimator,value,stderr,n_paths,seed\n", 0) == 0);
    // one row per level per estimator
    int lines = 0;
    for (char ch : csv) lines += (ch == '\n');
    CHECK(lines == 1 + 3 * 3);

    const RateFits fits = fit_rate(table);
    REQUIRE(fits.eau.valid);
    CHECK(fits.eau.slope == Approx(0.5).margin(1e-12));
    std::ostringstream rates;
    write_rates_csv(table, fits, rates);
    CHECK(rates.str().find("time,EAu,") != std::string::npos);

    std::vector<SvgSeries> series(1);
    series[0].label = "EAu";
    for (const LevelEstimate& row : table.rows) {
        series[0].x.push_back(row.level);
        series[0].y.push_back(row.eau);
    }
    std::ostringstream svg;
    write_svg_loglog("strong errors", "k", series, svg);
    CHECK(svg.str().find("<svg") != std::string::npos);
    CHECK(svg.str().find("slope") != std::string::npos);
}
