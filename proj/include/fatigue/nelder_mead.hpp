#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fatigue::optim {

struct NelderMeadOptions {
    double initial_step = 0.1;  // simplex edge along each coordinate
    double xatol = 1e-10;       // max vertex distance (inf-norm) from the best vertex
    double fatol = 1e-12;       // max |f - f_best| over the simplex
    std::size_t max_evaluations = 4000;
    bool adaptive = false;      // Gao-Han dimension-dependent coefficients
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;          // objective at x (the minimised function)
    std::size_t evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

// Minimises `f` starting from `x0`. Non-finite values (NaN, +inf) are treated
// as +inf, so returning +inf is the way to express a box constraint.
NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0,
                             const NelderMeadOptions& options = {});

// Runs nelder_mead from every start point and returns the best result.
NelderMeadResult multi_start_nelder_mead(const Objective& f, const std::vector<std::vector<double>>& starts,
                                         const NelderMeadOptions& options = {});

} // namespace fatigue::optim
