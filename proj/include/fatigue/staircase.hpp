#pragma once

#include "fatigue/discretize.hpp"
#include "fatigue/model.hpp"
#include "fatigue/simulator.hpp"

#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace fatigue {

enum class LevelRounding {
    ExactGeometric,    // L_i = l_ini * d^i
    SequentialInteger, // round(l_ini), then each neighbour rounded from the previous rounded level
};

// How the level statistics are turned into a mean estimate. Both take the
// lowest valid level L_0 and the mean level index m = sum(k l_k) / sum(l_k).
enum class StaircaseEstimator {
    LiteralIndexMean,       // L_0 * m
    GeometricInterpolation, // L_0 * d^m
};

struct StaircaseConfig {
    double l_ini = 400.0;
    double d = 1.0715193052376064;
    LevelRounding level_rounding = LevelRounding::SequentialInteger;
    StaircaseEstimator estimator = StaircaseEstimator::GeometricInterpolation;

    void validate() const;
};

enum class InvalidityReason {
    InitialLoadNotRevisited,
    FewerThanThreeLevels,
    FewerThanTwoTurningPoints,
};

std::string_view to_string(InvalidityReason r) noexcept;

struct StaircaseAnalysis {
    double l0 = 0.0;
    int l0_index = 0;                // lattice index of L_0
    std::map<int, int> level_counts; // k (relative to L_0) -> l_k
    double mu_hat = 0.0;
    bool valid = false;
    std::vector<InvalidityReason> invalidity_reasons;
    std::size_t trimmed_records = 0; // leading records cut for the revisit rule
};

// Load of lattice level `index`.
double level_load(const StaircaseConfig& config, int index);

// Levels for indices lo..hi inclusive, ascending. Throws DomainError if the
// range is empty or does not contain 0.
std::vector<double> generate_levels(const StaircaseConfig& config, int lo, int hi);

// Lattice index of `load`; DomainError if it is not a level (0.5 N tolerance
// for SequentialInteger, relative 1e-9 for ExactGeometric).
int level_index_of(const StaircaseConfig& config, double load);

// Failure -> one level down, runout -> one level up.
constexpr int next_level(int current_level_index, Outcome outcome) noexcept {
    return outcome == Outcome::Failure ? current_level_index - 1 : current_level_index + 1;
}

struct StaircaseRun {
    ExperimentSeries series;
    std::vector<int> level_indices;
    SimulatorState sim;
};

// Runs the up/down protocol from level 0 for n_experiments. The applied load is
// discretize_load(level_load(i)); the recorded load is the applied one.
StaircaseRun run_staircase_levels(const StaircaseConfig& config, SimulatorState sim,
                                  int n_experiments,
                                  Discretization discretization = Discretization::None);

std::pair<ExperimentSeries, SimulatorState> run_staircase(const StaircaseConfig& config,
                                                          SimulatorState sim, int n_experiments);

// Core analysis on lattice indices. `levels` and `outcomes` must have equal,
// non-zero length.
StaircaseAnalysis analyze_levels(std::span<const int> levels, std::span<const Outcome> outcomes,
                                 const StaircaseConfig& config);

StaircaseAnalysis analyze_staircase(const ExperimentSeries& series, const StaircaseConfig& config);

} // namespace fatigue
