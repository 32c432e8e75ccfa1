#pragma once

#include <string_view>

namespace fatigue {

// Rounding applied to a recommended load before it goes to the test rig.
// MinusOne rounds to 10^1 (multiples of ten, the usual lab setting).
enum class Discretization { None, MinusOne };

// None -> l. MinusOne -> nearest multiple of ten, ties upward, never below 10.
double discretize_load(double load, Discretization factor);

std::string_view to_string(Discretization d) noexcept;
// Accepts "none" and "ten" (also "minus_one" / "-1").
Discretization discretization_from_string(std::string_view s);

} // namespace fatigue
