#pragma once

namespace fatigue {

// Standard normal density.
double normal_pdf(double z) noexcept;

// Standard normal CDF via erfc; relative error stays near machine precision
// in both tails because erfc is evaluated on the side that does not cancel.
double normal_cdf(double z) noexcept;

// log(Phi(z)) without underflow. For z < -37 erfc underflows, so an
// asymptotic series around the Mills ratio is used instead. Returns -inf only
// for z == -inf.
double log_normal_cdf(double z) noexcept;

} // namespace fatigue
