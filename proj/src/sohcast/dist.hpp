#pragma once

#include <cmath>

#include "sohcast/error.hpp"

namespace sohcast {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

struct GaussianSpec {
    double mu = 0.0;
    double sigma = 1.0;
};

struct LaplaceSpec {
    double loc = 0.0;
    double scale = 1.0;
};

inline double gaussian_log_prob(const GaussianSpec& spec, double y) {
    if (!(spec.sigma > 0.0)) {
        throw DomainError("gaussian_log_prob: sigma must be positive, got " +
                          std::to_string(spec.sigma));
    }
    const double z = (y - spec.mu) / spec.sigma;
    return -0.5 * kLog2Pi - std::log(spec.sigma) - 0.5 * z * z;
}

inline double laplace_log_prob(const LaplaceSpec& spec, double x) {
    if (!(spec.scale > 0.0)) {
        throw DomainError("laplace_log_prob: scale must be positive, got " +
                          std::to_string(spec.scale));
    }
    return -std::log(2.0 * spec.scale) - std::abs(x - spec.loc) / spec.scale;
}

// Standard normal density and CDF.
inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

inline double gaussian_pdf(const GaussianSpec& s, double y) {
    return norm_pdf((y - s.mu) / s.sigma) / s.sigma;
}

inline double gaussian_cdf(const GaussianSpec& s, double y) {
    return norm_cdf((y - s.mu) / s.sigma);
}

// CRPS of a Gaussian forecast at observation y (closed form).
inline double gaussian_crps(const GaussianSpec& s, double y) {
    if (!(s.sigma > 0.0)) return std::abs(y - s.mu);  // point-mass limit
    const double z = (y - s.mu) / s.sigma;
    return s.sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - 1.0 / kSqrtPi);
}

// E|X| for X ~ N(m, s2); the building block of the mixture CRPS closed form.
inline double gaussian_abs_moment(double m, double s2) {
    if (s2 <= 0.0) return std::abs(m);
    const double s = std::sqrt(s2);
    const double z = m / s;
    return m * (2.0 * norm_cdf(z) - 1.0) + 2.0 * s * norm_pdf(z);
}

}  // namespace sohcast
