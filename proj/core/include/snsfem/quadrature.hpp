#pragma once

#include <vector>

#include "snsfem/mesh.hpp"

namespace snsfem {

/// Quadrature rule on the reference triangle (0,0),(1,0),(0,1).
/// Weights are positive and sum to the reference area 1/2; the rule is exact
/// for all polynomials up to `degree`.
struct QuadratureRule {
    int degree = 0;
    std::vector<Vec2> points;
    std::vector<double> weights;

    int size() const { return static_cast<int>(points.size()); }
};

/// Smallest stocked rule exact to at least `min_degree` (1 <= min_degree <= 10).
const QuadratureRule& quadrature_rule(int min_degree);

} // namespace snsfem
