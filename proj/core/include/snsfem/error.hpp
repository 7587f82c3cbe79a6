#pragma once

#include <stdexcept>
#include <string>

namespace snsfem {

/// Invalid arguments or contract violations detected before any work is done.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear solve failed to reach the requested residual, or a factorization
/// broke down. Carries the achieved residual and the name of the offending
/// block for saddle systems.
class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, double residual, std::string block = {})
        : std::runtime_error(what), residual_(residual), block_(std::move(block)) {}

    double residual() const { return residual_; }
    const std::string& block() const { return block_; }

private:
    double residual_;
    std::string block_;
};

/// Nonlinear (Picard) iteration exhausted its cap without reaching tolerance.
class PicardError : public std::runtime_error {
public:
    PicardError(const std::string& what, int step, double residual)
        : std::runtime_error(what), step_(step), residual_(residual) {}

    int step() const { return step_; }
    double last_residual() const { return residual_; }

private:
    int step_;
    double residual_;
};

#define SNSFEM_REQUIRE(cond, msg)                    \
    do {                                             \
        if (!(cond)) {                               \
            throw ::snsfem::InvalidArgument(msg);    \
        }                                            \
    } while (0)

} // namespace snsfem
