#include "fatigue/normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fatigue {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
} // namespace

double normal_pdf(double z) noexcept {
    return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double normal_cdf(double z) noexcept {
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

double log_normal_cdf(double z) noexcept {
    if (std::isnan(z)) return z;
    if (z == -std::numeric_limits<double>::infinity()) return z;
    if (z > 5.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
    if (z > -37.0) return std::log(0.5 * std::erfc(-z * kInvSqrt2));
    // Phi(z) = phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - 945/z^10 ...)
    const double w = 1.0 / (z * z);
    const double series = 1.0 - w * (1.0 - w * (3.0 - w * (15.0 - w * (105.0 - w * 945.0))));
    return -0.5 * z * z - kLogSqrt2Pi - std::log(-z) + std::log(series);
}

} // namespace fatigue
