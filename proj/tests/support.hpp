#ifndef CONFOR_TESTS_SUPPORT_HPP
#define CONFOR_TESTS_SUPPORT_HPP

// Test-only oracles, kept independent of the library's computation paths:
// quadrature for integrals the library computes in closed form, exhaustive
// grid minimization for optima the library finds by Newton, and hand
// enumeration for weighted quantiles.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace testsupport {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb, double whole,
                                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 48) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

struct GridMin {
    double x;
    double value;
    double step;
};

inline GridMin grid_minimize(const std::function<double(double)>& f, double lo, double hi,
                             std::size_t points) {
    if (points < 2 || !(hi > lo)) throw std::invalid_argument("grid_minimize: bad grid");
    const double step = (hi - lo) / static_cast<double>(points - 1);
    GridMin best{lo, f(lo), step};
    for (std::size_t i = 1; i < points; ++i) {
        const double x = lo + static_cast<double>(i) * step;
        const double v = f(x);
        if (v < best.value) best = {x, v, step};
    }
    return best;
}

// Smallest value whose cumulative weight reaches u, by direct enumeration of
// (value, weight) pairs.
inline double enumerated_weighted_quantile(std::vector<std::pair<double, double>> atoms,
                                           double u) {
    std::sort(atoms.begin(), atoms.end());
    double total = 0.0;
    for (const auto& a : atoms) total += a.second;
    double cum = 0.0;
    for (const auto& a : atoms) {
        cum += a.second / total;
        if (cum >= u) return a.first;
    }
    return atoms.back().first;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testsupport

#endif
