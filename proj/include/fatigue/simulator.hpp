#pragma once

#include "fatigue/model.hpp"

#include <cstdint>
#include <utility>

namespace fatigue {

// Ground truth plus the position in a SplitMix64 stream. One uniform is
// consumed per simulated experiment, in call order.
struct SimulatorState {
    MaterialParams truth;
    std::uint64_t rng_seed = 0;
    std::uint64_t draws = 0;
};

// Failure iff u < failure_probability(truth, load), u ~ U[0,1) being draw
// number `state.draws` of the stream.
std::pair<Outcome, SimulatorState> simulate(SimulatorState state, double load);

} // namespace fatigue
