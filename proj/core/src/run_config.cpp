#include "snsfem/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "snsfem/error.hpp"

namespace snsfem {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        SNSFEM_REQUIRE(pos == value.size(), "config: trailing junk in value of '" + key + "'");
        return v;
    } catch (const InvalidArgument&) {
        throw;
    } catch (...) {
        throw InvalidArgument("config: cannot parse number for key '" + key + "'");
    }
}

long long parse_int(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        SNSFEM_REQUIRE(pos == value.size(), "config: trailing junk in value of '" + key + "'");
        return v;
    } catch (const InvalidArgument&) {
        throw;
    } catch (...) {
        throw InvalidArgument("config: cannot parse integer for key '" + key + "'");
    }
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InvalidArgument("config: expected true/false for key '" + key + "'");
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_int(item, key)));
    }
    SNSFEM_REQUIRE(!out.empty(), "config: empty list for key '" + key + "'");
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value) {
    SchemeConfig& s = cfg.scheme;
    StudyConfig& st = cfg.study;
    if (section == "scheme") {
        if (key == "nu") s.nu = parse_double(value, key);
        else if (key == "T") s.T = parse_double(value, key);
        else if (key == "n_steps") s.n_steps = static_cast<int>(parse_int(value, key));
        else if (key == "n_side") s.n_side = static_cast<int>(parse_int(value, key));
        else if (key == "picard_tol") s.picard_tol = parse_double(value, key);
        else if (key == "picard_max") s.picard_max = static_cast<int>(parse_int(value, key));
        else if (key == "linear_tol") s.linear_tol = parse_double(value, key);
        else if (key == "quad_degree") s.quad_degree = static_cast<int>(parse_int(value, key));
        else if (key == "body_force_x") s.body_force[0] = parse_double(value, key);
        else if (key == "body_force_y") s.body_force[1] = parse_double(value, key);
        else if (key == "observer_stride") s.observer_stride = static_cast<int>(parse_int(value, key));
        else if (key == "nonlinear") {
            if (value == "lagged") s.nonlinear = NonlinearStrategy::LaggedFixedPoint;
            else if (value == "frozen") s.nonlinear = NonlinearStrategy::FrozenPicard;
            else throw InvalidArgument("config: nonlinear must be 'lagged' or 'frozen'");
        } else throw InvalidArgument("config: unknown key 'scheme." + key + "'");
    } else if (section == "noise") {
        if (key == "M") s.noise.modes_per_axis = static_cast<int>(parse_int(value, key));
        else if (key == "amplitude") s.noise.amplitude = parse_double(value, key);
        else if (key == "period_L") s.noise.period_L = parse_double(value, key);
        else if (key == "vector_valued") s.noise.vector_valued = parse_bool(value, key);
        else if (key == "diffusion") {
            if (value == "sqrt_one_plus_square") s.diffusion = DiffusionOperator::sqrt_one_plus_square();
            else if (value == "zero") s.diffusion = DiffusionOperator::zero();
            else throw InvalidArgument("config: diffusion must be 'sqrt_one_plus_square' or 'zero'");
        } else throw InvalidArgument("config: unknown key 'noise." + key + "'");
    } else if (section == "study") {
        if (key == "n_paths") st.n_paths = static_cast<int>(parse_int(value, key));
        else if (key == "master_seed") st.master_seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "parallel") st.parallel = static_cast<int>(parse_int(value, key));
        else if (key == "epsilon") st.epsilon = parse_double(value, key);
        else if (key == "kappa0") st.kappa0 = parse_double(value, key);
        else if (key == "kappa") st.kappa = parse_double(value, key);
        else if (key == "k_levels") st.k_levels = parse_int_list(value, key);
        else if (key == "h_levels") st.h_levels = parse_int_list(value, key);
        else if (key == "svg") st.svg = parse_bool(value, key);
        else if (key == "full_scale") st.full_scale = parse_bool(value, key);
        else throw InvalidArgument("config: unknown key 'study." + key + "'");
    } else {
        throw InvalidArgument("config: unknown section '" + section + "'");
    }
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            SNSFEM_REQUIRE(line.back() == ']',
                           "config: malformed section header at line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        SNSFEM_REQUIRE(eq != std::string::npos,
                       "config: expected key = value at line " + std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        SNSFEM_REQUIRE(!section.empty(), "config: key '" + key + "' outside any section");
        apply_key(cfg, section, key, value);
    }
    cfg.validate();
    if (cfg.study.full_scale) cfg.apply_full_scale();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    SNSFEM_REQUIRE(in.good(), "config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void RunConfig::validate() const {
    scheme.validate();
    SNSFEM_REQUIRE(study.n_paths >= 1, "config: study.n_paths must be >= 1");
    SNSFEM_REQUIRE(study.parallel >= 0, "config: study.parallel must be >= 0");
    SNSFEM_REQUIRE(!study.k_levels.empty(), "config: study.k_levels empty");
    SNSFEM_REQUIRE(!study.h_levels.empty(), "config: study.h_levels empty");

    int n_max = 0;
    for (int n : study.k_levels) {
        SNSFEM_REQUIRE(n >= 1, "config: k level step counts must be >= 1");
        n_max = std::max(n_max, n);
    }
    for (int n : study.k_levels) {
        SNSFEM_REQUIRE(n_max % n == 0, "config: time levels must divide the finest level");
    }
    for (std::size_t i = 0; i < study.h_levels.size(); ++i) {
        SNSFEM_REQUIRE(study.h_levels[i] >= 2, "config: h level n_side must be >= 2");
        for (std::size_t j = i + 1; j < study.h_levels.size(); ++j) {
            const int a = std::min(study.h_levels[i], study.h_levels[j]);
            const int b = std::max(study.h_levels[i], study.h_levels[j]);
            SNSFEM_REQUIRE(b % a == 0 && (b / a & (b / a - 1)) == 0,
                           "config: space levels must be nested (power-of-two ratios)");
        }
    }
}

void RunConfig::apply_full_scale() {
    study.n_paths = 1200;
    scheme.n_side = 128;   // h = 2^-7 (times sqrt 2)
    scheme.n_steps = 512;  // k = 2^-9
    study.k_levels = {8, 16, 32, 64, 128, 256};
    study.h_levels = {4, 8, 16, 32, 64};
}

int RunConfig::resolved_threads() const {
    if (study.parallel > 0) return study.parallel;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void write_config(const RunConfig& cfg, std::ostream& os) {
    const SchemeConfig& s = cfg.scheme;
    const StudyConfig& st = cfg.study;
    os << "[scheme]\n";
    os << "nu = " << fmt(s.nu) << "\n";
    os << "T = " << fmt(s.T) << "\n";
    os << "n_steps = " << s.n_steps << "\n";
    os << "n_side = " << s.n_side << "\n";
    os << "picard_tol = " << fmt(s.picard_tol) << "\n";
    os << "picard_max = " << s.picard_max << "\n";
    os << "linear_tol = " << fmt(s.linear_tol) << "\n";
    os << "quad_degree = " << s.quad_degree << "\n";
    os << "body_force_x = " << fmt(s.body_force[0]) << "\n";
    os << "body_force_y = " << fmt(s.body_force[1]) << "\n";
    os << "observer_stride = " << s.observer_stride << "\n";
    os << "nonlinear = "
       << (s.nonlinear == NonlinearStrategy::LaggedFixedPoint ? "lagged" : "frozen") << "\n";
    os << "\n[noise]\n";
    os << "M = " << s.noise.modes_per_axis << "\n";
    os << "amplitude = " << fmt(s.noise.amplitude) << "\n";
    os << "period_L = " << fmt(s.noise.period_L) << "\n";
    os << "vector_valued = " << (s.noise.vector_valued ? "true" : "false") << "\n";
    os << "diffusion = "
       << (s.diffusion.kind == DiffusionOperator::Kind::Zero ? "zero" : "sqrt_one_plus_square")
       << "\n";
    os << "\n[study]\n";
    os << "n_paths = " << st.n_paths << "\n";
    os << "master_seed = " << st.master_seed << "\n";
    os << "parallel = " << st.parallel << "\n";
    os << "epsilon = " << fmt(st.epsilon) << "\n";
    os << "kappa0 = " << fmt(st.kappa0) << "\n";
    os << "kappa = " << fmt(st.kappa) << "\n";
    os << "k_levels = ";
    for (std::size_t i = 0; i < st.k_levels.size(); ++i) {
        os << (i ? "," : "") << st.k_levels[i];
    }
    os << "\n";
    os << "h_levels = ";
    for (std::size_t i = 0; i < st.h_levels.size(); ++i) {
        os << (i ? "," : "") << st.h_levels[i];
    }
    os << "\n";
    os << "svg = " << (st.svg ? "true" : "false") << "\n";
    os << "full_scale = false\n"; // already resolved into the level lists above
}

} // namespace snsfem
