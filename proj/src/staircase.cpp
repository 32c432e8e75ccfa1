#include "fatigue/staircase.hpp"

#include "fatigue/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fatigue {

void StaircaseConfig::validate() const {
    if (!(l_ini > 0.0)) throw DomainError("StaircaseConfig: l_ini must be positive");
    if (!(d > 1.0)) throw DomainError("StaircaseConfig: step factor d must be > 1");
    if (level_rounding == LevelRounding::SequentialInteger && std::round(l_ini) < 1.0)
        throw DomainError("StaircaseConfig: l_ini rounds to zero");
}

std::string_view to_string(InvalidityReason r) noexcept {
    switch (r) {
    case InvalidityReason::InitialLoadNotRevisited: return "initial_load_not_revisited";
    case InvalidityReason::FewerThanThreeLevels: return "fewer_than_three_levels";
    case InvalidityReason::FewerThanTwoTurningPoints: return "fewer_than_two_turning_points";
    }
    return "unknown";
}

double level_load(const StaircaseConfig& config, int index) {
    config.validate();
    if (config.level_rounding == LevelRounding::ExactGeometric)
        return config.l_ini * std::pow(config.d, index);

    double load = std::round(config.l_ini);
    if (index > 0) {
        for (int i = 0; i < index; ++i) load = std::round(load * config.d);
    } else {
        for (int i = 0; i > index; --i) load = std::round(load / config.d);
    }
    // Integer rounding can collapse very small levels onto zero.
    if (!(load > 0.0)) throw DomainError("level_load: level " + std::to_string(index) + " collapses to 0 N");
    return load;
}

std::vector<double> generate_levels(const StaircaseConfig& config, int lo, int hi) {
    if (lo > hi) throw DomainError("generate_levels: empty index range");
    if (lo > 0 || hi < 0) throw DomainError("generate_levels: index range must contain 0");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (int i = lo; i <= hi; ++i) out.push_back(level_load(config, i));
    return out;
}

int level_index_of(const StaircaseConfig& config, double load) {
    config.validate();
    if (!(load > 0.0)) throw DomainError("level_index_of: load must be positive");
    const int guess = static_cast<int>(std::lround(std::log(load / config.l_ini) / std::log(config.d)));
    for (int delta : {0, -1, 1, -2, 2}) {
        const int i = guess + delta;
        const double level = level_load(config, i);
        const bool hit = config.level_rounding == LevelRounding::SequentialInteger
                             ? std::abs(level - load) <= 0.5
                             : std::abs(level - load) <= 1e-9 * level;
        if (hit) return i;
    }
    throw DomainError("level_index_of: load " + std::to_string(load) + " is not on the staircase lattice");
}

StaircaseRun run_staircase_levels(const StaircaseConfig& config, SimulatorState sim, int n_experiments,
                                  Discretization discretization) {
    if (n_experiments < 1) throw DomainError("run_staircase: n_experiments must be >= 1");
    config.validate();
    StaircaseRun run{ExperimentSeries{}, {}, sim};
    run.level_indices.reserve(static_cast<std::size_t>(n_experiments));
    int level = 0;
    for (int t = 0; t < n_experiments; ++t) {
        const double load = discretize_load(level_load(config, level), discretization);
        auto [outcome, next_sim] = simulate(run.sim, load);
        run.sim = next_sim;
        run.series.append(load, outcome);
        run.level_indices.push_back(level);
        level = next_level(level, outcome);
    }
    return run;
}

std::pair<ExperimentSeries, SimulatorState> run_staircase(const StaircaseConfig& config, SimulatorState sim,
                                                          int n_experiments) {
    auto run = run_staircase_levels(config, sim, n_experiments);
    return {std::move(run.series), run.sim};
}

namespace {

int count_turning_points(std::span<const Outcome> outcomes) {
    int turns = 0;
    for (std::size_t i = 1; i < outcomes.size(); ++i)
        if (outcomes[i] != outcomes[i - 1]) ++turns;
    return turns;
}

// Smallest start such that the level at that start recurs later, or npos.
std::size_t revisit_start(std::span<const int> levels) {
    for (std::size_t s = 0; s < levels.size(); ++s)
        if (std::find(levels.begin() + static_cast<std::ptrdiff_t>(s) + 1, levels.end(), levels[s]) != levels.end())
            return s;
    return levels.size();
}

} // namespace

StaircaseAnalysis analyze_levels(std::span<const int> levels, std::span<const Outcome> outcomes,
                                 const StaircaseConfig& config) {
    config.validate();
    if (levels.empty() || levels.size() != outcomes.size())
        throw DomainError("analyze_staircase: need a non-empty series with one outcome per level");

    StaircaseAnalysis a;
    const std::size_t start = revisit_start(levels);
    const bool revisited = start < levels.size();
    if (revisited) a.trimmed_records = start;
    else a.invalidity_reasons.push_back(InvalidityReason::InitialLoadNotRevisited);

    const auto lv = revisited ? levels.subspan(start) : levels;
    const auto oc = revisited ? outcomes.subspan(start) : outcomes;

    if (std::set<int>(lv.begin(), lv.end()).size() < 3)
        a.invalidity_reasons.push_back(InvalidityReason::FewerThanThreeLevels);
    if (count_turning_points(oc) < 2)
        a.invalidity_reasons.push_back(InvalidityReason::FewerThanTwoTurningPoints);

    a.valid = a.invalidity_reasons.empty();
    if (!a.valid) {
        a.mu_hat = config.l_ini;
        return a;
    }

    a.l0_index = *std::min_element(lv.begin(), lv.end());
    a.l0 = level_load(config, a.l0_index);
    for (int level : lv) ++a.level_counts[level - a.l0_index];

    double weighted = 0.0, total = 0.0;
    for (const auto& [k, count] : a.level_counts) {
        weighted += static_cast<double>(k) * count;
        total += count;
    }
    const double mean_index = weighted / total;
    a.mu_hat = config.estimator == StaircaseEstimator::LiteralIndexMean
                   ? a.l0 * mean_index
                   : a.l0 * std::pow(config.d, mean_index);
    return a;
}

StaircaseAnalysis analyze_staircase(const ExperimentSeries& series, const StaircaseConfig& config) {
    std::vector<int> levels;
    std::vector<Outcome> outcomes;
    levels.reserve(series.size());
    outcomes.reserve(series.size());
    for (const auto& r : series.records()) {
        levels.push_back(level_index_of(config, r.load));
        outcomes.push_back(r.outcome);
    }
    return analyze_levels(levels, outcomes, config);
}

} // namespace fatigue
