#include "snsfem/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "snsfem/error.hpp"

namespace snsfem {

namespace {

// Orbit generators in barycentric coordinates (a,a,1-2a) and full
// permutations of (a,b,1-a-b). Weights are fractions of the total (sum 1);
// they are scaled by the reference area 1/2 on emission.
void push_centroid(QuadratureRule& r, double w) {
    r.points.push_back(Vec2{1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(0.5 * w);
}

void push_orbit3(QuadratureRule& r, double a, double w) {
    const double b = 1.0 - 2.0 * a;
    const Vec2 pts[3] = {Vec2{a, a}, Vec2{b, a}, Vec2{a, b}};
    for (const Vec2& p : pts) {
        r.points.push_back(p);
        r.weights.push_back(0.5 * w);
    }
}

void push_orbit6(QuadratureRule& r, double a, double b, double w) {
    const double c = 1.0 - a - b;
    const Vec2 pts[6] = {Vec2{a, b}, Vec2{b, a}, Vec2{a, c},
                         Vec2{c, a}, Vec2{b, c}, Vec2{c, b}};
    for (const Vec2& p : pts) {
        r.points.push_back(p);
        r.weights.push_back(0.5 * w);
    }
}

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on P_n.
std::vector<std::pair<double, double>> gauss_legendre_01(int n) {
    std::vector<std::pair<double, double>> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double p1 = x, p0 = 1.0, dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            p0 = 1.0;
            p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                // one clean-up pass to refresh p1, dp at the converged node
                p0 = 1.0;
                p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                break;
            }
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[static_cast<std::size_t>(i)] = {0.5 * (x + 1.0), 0.5 * w};
    }
    return out;
}

// Collapsed (Duffy) product rule on the triangle, exact to total degree
// 2n - 2 with all-positive weights: x = xi, y = eta (1 - xi), weight
// carries the (1 - xi) Jacobian.
void push_collapsed(QuadratureRule& r, int n) {
    const auto gl = gauss_legendre_01(n);
    for (const auto& [xi, wx] : gl) {
        for (const auto& [eta, wy] : gl) {
            r.points.push_back(Vec2{xi, eta * (1.0 - xi)});
            r.weights.push_back(wx * wy * (1.0 - xi));
        }
    }
}

QuadratureRule make_rule(int degree) {
    QuadratureRule r;
    r.degree = degree;
    switch (degree) {
    case 1:
        push_centroid(r, 1.0);
        break;
    case 2:
        push_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
        break;
    case 4:
        push_orbit3(r, 0.445948490915965, 0.223381589678011);
        push_orbit3(r, 0.091576213509771, 0.109951743655322);
        break;
    case 5:
        push_centroid(r, 0.225);
        push_orbit3(r, 0.470142064105115, 0.132394152788506);
        push_orbit3(r, 0.101286507323456, 0.125939180544827);
        break;
    case 6:
        push_orbit3(r, 0.249286745170910, 0.116786275726379);
        push_orbit3(r, 0.063089014491502, 0.050844906370207);
        push_orbit6(r, 0.310352451033785, 0.636502499121399, 0.082851075618374);
        break;
    case 8:
        push_collapsed(r, 5);
        break;
    case 10:
        push_collapsed(r, 6);
        break;
    default:
        throw InvalidArgument("quadrature: no stocked rule for this degree");
    }
    return r;
}

// The degree-3 and degree-7 Dunavant rules carry negative weights; requests
// for those degrees are served by the next positive-weight rule up.
int stocked_degree(int min_degree) {
    SNSFEM_REQUIRE(min_degree >= 1 && min_degree <= 10,
                   "quadrature_rule: supported degrees are 1..10");
    static const int table[11] = {0, 1, 2, 4, 4, 5, 6, 8, 8, 10, 10};
    return table[min_degree];
}

} // namespace

const QuadratureRule& quadrature_rule(int min_degree) {
    const int deg = stocked_degree(min_degree);
    static std::map<int, QuadratureRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(deg);
    if (it == cache.end()) {
        it = cache.emplace(deg, make_rule(deg)).first;
    }
    return it->second;
}

} // namespace snsfem
