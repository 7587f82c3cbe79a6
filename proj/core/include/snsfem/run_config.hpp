#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "snsfem/stepper.hpp"

namespace snsfem {

/// Study-level knobs on top of the scheme parameters. Level lists are given
/// as integers: step counts N (k = T/N) for the time axis and cells per side
/// for the space axis.
struct StudyConfig {
    std::vector<int> k_levels{8, 16, 32, 64, 128}; ///< k in {2^-3 .. 2^-7}
    std::vector<int> h_levels{4, 8, 16, 32};       ///< h in {2^-2 .. 2^-5}
    int n_paths = 100;
    std::uint64_t master_seed = 42;
    int parallel = 0; ///< worker threads; 0 = hardware concurrency
    double epsilon = 1.0;
    double kappa0 = 1.0;
    double kappa = 1.0;
    bool svg = false;
    bool full_scale = false; ///< switch to the headline configuration
};

struct RunConfig {
    SchemeConfig scheme; ///< defaults: nu=1, T=1, M=10, u0=(0,0)
    StudyConfig study;

    void validate() const;
    /// Apply the full-scale switch (N_p=1200, h down to 2^-7, k down to 2^-9).
    void apply_full_scale();
    int resolved_threads() const;
};

/// Parse a flat TOML-style file with [scheme], [noise], [study] sections.
/// Unknown sections or keys are rejected.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Canonical serialization; parse_config_text(round-trip) reproduces the
/// configuration exactly (doubles written with max precision).
void write_config(const RunConfig& config, std::ostream& os);

} // namespace snsfem
