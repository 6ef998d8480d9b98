#pragma once

// Test-side oracles: finite differences and small helpers. Nothing here is
// used by the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Fourth-order central difference of a scalar function of one variable.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

/// Sixth-order central difference; used where the directional derivative
/// may be small relative to the function value.
inline double derivative6(const std::function<double(double)>& f, double x, double h) {
    return (-f(x - 3 * h) + 9 * f(x - 2 * h) - 45 * f(x - h) + 45 * f(x + h) - 9 * f(x + 2 * h) + f(x + 3 * h)) /
           (60 * h);
}

/// Gradient of f: R^n -> R by fourth-order central differences.
inline std::vector<double> gradient(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        g[i] = derivative(
            [&](double s) {
                x[i] = s;
                const double v = f(x);
                x[i] = x0;
                return v;
            },
            x0, h);
    }
    return g;
}

inline double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// ‖a - b‖ / max(‖a‖, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return norm(d) / std::max(norm(a), floor);
}

inline double relative_error(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max(std::abs(a), floor);
}

/// Least-squares slope of log(err) against log(h).
inline double observed_order(const std::vector<double>& h, const std::vector<double>& err) {
    const std::size_t n = h.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(h[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
