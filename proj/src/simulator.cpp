#include "fatigue/simulator.hpp"

#include "fatigue/errors.hpp"
#include "fatigue/rng.hpp"

namespace fatigue {

std::pair<Outcome, SimulatorState> simulate(SimulatorState state, double load) {
    if (!(load > 0.0)) throw DomainError("simulate: load must be positive");
    const double p = failure_probability(state.truth, load);
    const double u = to_unit_double(splitmix64_at(state.rng_seed, state.draws));
    ++state.draws;
    return {u < p ? Outcome::Failure : Outcome::Runout, state};
}

} // namespace fatigue
