#include "fatigue/discretize.hpp"

#include "fatigue/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fatigue {

double discretize_load(double load, Discretization factor) {
    if (!(load > 0.0)) throw DomainError("discretize_load: load must be positive");
    if (factor == Discretization::None) return load;
    return std::max(10.0, 10.0 * std::floor(load / 10.0 + 0.5));
}

std::string_view to_string(Discretization d) noexcept {
    return d == Discretization::None ? "none" : "ten";
}

Discretization discretization_from_string(std::string_view s) {
    if (s == "none" || s == "None") return Discretization::None;
    if (s == "ten" || s == "minus_one" || s == "-1") return Discretization::MinusOne;
    throw ConfigError("unknown discretization '" + std::string(s) + "' (expected none|ten)");
}

} // namespace fatigue
