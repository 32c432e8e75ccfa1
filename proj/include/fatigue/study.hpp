#pragma once

// Monte Carlo convergence studies: repeated simulated campaigns for the
// staircase benchmark and the two Bayesian acquisition functions, recording
// the residual |mu_L - mu_hat| after every experiment.

#include "fatigue/bayes.hpp"
#include "fatigue/discretize.hpp"
#include "fatigue/model.hpp"
#include "fatigue/staircase.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fatigue::study {

enum class Method { Staircase, EntropyAcq, MapAcq };

std::string_view to_string(Method m) noexcept;
Method method_from_string(std::string_view s);

struct StudyConfig {
    MaterialParams truth{400.0, 1.0715193052376064};
    Method method = Method::EntropyAcq;
    double mean_misspec_pct = 0.0;
    double prior_width = 10.0;  // prior std of log10(mu) is log10(prior_width)
    Discretization discretization = Discretization::None;
    int n_runs = 100;
    int n_iterations = 30;
    std::uint64_t seed = 0;

    std::size_t grid_points = 100000;
    std::size_t entropy_samples = 10000;
    int map_restarts = 8;
    MapBounds map_bounds = MapBounds::PriorSupport;
    int acquisition_restarts = 8;
    StaircaseEstimator staircase_estimator = StaircaseEstimator::GeometricInterpolation;
    // Keep runs whose posterior degenerates (flagged divergent) instead of aborting.
    bool allow_degenerate = true;
    unsigned threads = 0; // 0: hardware concurrency

    void validate() const;
    // Prior mean load after misspecification.
    double prior_mean_load() const { return truth.mu_l * (1.0 + mean_misspec_pct / 100.0); }
};

// Full-scale and desk-scale defaults for runs, iterations and grid size.
enum class Profile { Paper, Ci };
Profile profile_from_string(std::string_view s);
void apply_profile(StudyConfig& config, Profile profile, bool discretization_study);

struct RunTrajectory {
    std::vector<double> residuals; // |mu_L - mu_hat| after each iteration, N
    std::vector<double> estimates; // mu_hat after each iteration, N
    std::vector<double> loads;     // applied load per iteration, N
    std::vector<Outcome> outcomes;
    bool divergent = false;        // degenerate posterior, or final MAP on/outside the grid support edge
};

struct ConvergenceResult {
    StudyConfig config;
    std::vector<double> mean_residual;
    std::vector<double> std_residual;
    std::vector<RunTrajectory> runs;
    double wall_seconds = 0.0;

    std::size_t divergent_runs() const;
};

// One campaign. Deterministic in (config.seed, run_index).
RunTrajectory run_single(const StudyConfig& config, int run_index);

ConvergenceResult run_study(const StudyConfig& config);

struct DiscretizationComparison {
    ConvergenceResult none;
    ConvergenceResult ten;
    std::vector<double> mean_difference; // mean_residual(none) - mean_residual(ten)
    std::vector<double> band;            // 2 * standard error of the paired per-run differences
};

// Both discretization arms with identical seeds (common random numbers).
DiscretizationComparison run_discretization_study(StudyConfig config);

// Output helpers. Each writes a file and returns its path.
std::filesystem::path write_convergence_csv(const ConvergenceResult& result, const std::filesystem::path& dir);
std::filesystem::path write_runs_csv(const ConvergenceResult& result, const std::filesystem::path& dir);
std::filesystem::path write_manifest(const std::vector<ConvergenceResult>& results, const std::filesystem::path& dir,
                                     const std::string& name = "manifest.json");
std::filesystem::path write_discretization_csv(const DiscretizationComparison& cmp, const std::filesystem::path& dir);

// Cell file stem, e.g. "entropy_m+0_w1e+01_none".
std::string cell_name(const StudyConfig& config);

std::string convergence_csv(const ConvergenceResult& result);

// "load,failure_probability" rows at n equidistant loads in [lo, hi]. The
// exact median is emitted whenever it falls inside the range.
std::string failure_curve_csv(const MaterialParams& params, double lo, double hi, int n);

} // namespace fatigue::study
