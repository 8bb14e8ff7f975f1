// Test-only reference implementations, kept deliberately naive and
// independent of the library's code paths.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

// Naive triple-loop valid cross-correlation.
// input[t][c], kernels[k][w][c], bias[k] -> out[t][k]
inline std::vector<std::vector<double>> conv1d(
    const std::vector<std::vector<double>>& input,
    const std::vector<std::vector<std::vector<double>>>& kernels,
    const std::vector<double>& bias) {
    const std::size_t T = input.size();
    const std::size_t K = kernels.size();
    const std::size_t W = kernels[0].size();
    const std::size_t C = input[0].size();
    std::vector<std::vector<double>> out(T - W + 1, std::vector<double>(K, 0.0));
    for (std::size_t t = 0; t + W <= T; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            double acc = bias[k];
            for (std::size_t w = 0; w < W; ++w) {
                for (std::size_t c = 0; c < C; ++c) {
                    acc += input[t + w][c] * kernels[k][w][c];
                }
            }
            out[t][k] = acc;
        }
    }
    return out;
}

inline std::vector<double> avg_pool(const std::vector<std::vector<double>>& input) {
    const std::size_t T = input.size(), C = input[0].size();
    std::vector<double> out(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) acc += input[t][c];
        out[c] = acc / static_cast<double>(T);
    }
    return out;
}

inline std::vector<double> dense(const std::vector<double>& input,
                                 const std::vector<std::vector<double>>& weights,
                                 const std::vector<double>& bias) {
    const std::size_t D = weights.size(), U = weights[0].size();
    std::vector<double> out(U, 0.0);
    for (std::size_t u = 0; u < U; ++u) {
        double acc = bias[u];
        for (std::size_t d = 0; d < D; ++d) acc += input[d] * weights[d][u];
        out[u] = acc;
    }
    return out;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Mixed absolute/relative gradient-check error.
inline double grad_error(double analytic, double numeric) {
    const double denom = std::max({1e-2, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

// Composite Simpson rule over [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t intervals) {
    if (intervals % 2 == 1) ++intervals;
    const double h = (b - a) / static_cast<double>(intervals);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < intervals; ++i) {
        acc += f(a + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

// CRPS by numerical integration of (F(x) - 1{x >= y})^2 with the kink at y
// split out so Simpson keeps its order.
inline double crps_quadrature(const std::function<double(double)>& cdf, double y,
                              double lo, double hi, std::size_t intervals = 20000) {
    auto below = [&](double x) {
        const double F = cdf(x);
        return F * F;
    };
    auto above = [&](double x) {
        const double F = cdf(x) - 1.0;
        return F * F;
    };
    double acc = 0.0;
    if (y > lo) acc += simpson(below, lo, std::min(y, hi), intervals);
    if (y < hi) acc += simpson(above, std::max(y, lo), hi, intervals);
    return acc;
}

// Exhaustive simplex grid with the given step; returns the best objective
// value found (maximize=true takes the max).
inline double simplex_grid_best(
    std::size_t K, double step, bool maximize,
    const std::function<double(const std::vector<double>&)>& objective) {
    const long n = std::lround(1.0 / step);
    std::vector<double> w(K, 0.0);
    double best = maximize ? -1e300 : 1e300;
    std::function<void(std::size_t, long)> rec = [&](std::size_t k, long remaining) {
        if (k + 1 == K) {
            w[k] = static_cast<double>(remaining) / static_cast<double>(n);
            const double v = objective(w);
            if (maximize ? v > best : v < best) best = v;
            return;
        }
        for (long i = 0; i <= remaining; ++i) {
            w[k] = static_cast<double>(i) / static_cast<double>(n);
            rec(k + 1, remaining - i);
        }
    };
    rec(0, n);
    return best;
}

}  // namespace oracle
