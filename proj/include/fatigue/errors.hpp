#pragma once

#include <stdexcept>
#include <string>

namespace fatigue {

// Argument outside the mathematical domain of an operation (non-positive load,
// sigma <= 1, dimension mismatch, off-lattice staircase load, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Invalid user-supplied configuration (study settings, dataset size, folds).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Every evaluated point of a posterior is -inf: the prior and the observed
// series contradict each other numerically.
class DegeneratePosterior : public std::runtime_error {
public:
    explicit DegeneratePosterior(const std::string& what) : std::runtime_error(what) {}
};

// Raised when no hyperparameter candidate yields a positive definite Gram matrix.
class ConditioningError : public std::runtime_error {
public:
    explicit ConditioningError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fatigue
