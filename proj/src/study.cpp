#include "fatigue/study.hpp"

#include "fatigue/errors.hpp"
#include "fatigue/rng.hpp"
#include "fatigue/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace fatigue::study {

namespace {

constexpr std::uint64_t kSimulatorStream = 0;
constexpr std::uint64_t kEntropyStream = 1;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunTrajectory run_staircase_arm(const StudyConfig& config, int run_index) {
    StaircaseConfig sc;
    sc.l_ini = config.prior_mean_load();
    sc.d = config.truth.sigma_l;
    sc.level_rounding = LevelRounding::SequentialInteger;
    sc.estimator = config.staircase_estimator;

    const SimulatorState sim{config.truth, derive_seed(config.seed, static_cast<std::uint64_t>(run_index), kSimulatorStream), 0};
    const auto run = run_staircase_levels(sc, sim, config.n_iterations, config.discretization);

    RunTrajectory traj;
    std::vector<Outcome> outcomes;
    for (const auto& r : run.series.records()) outcomes.push_back(r.outcome);
    for (std::size_t t = 0; t < run.series.size(); ++t) {
        const auto a = analyze_levels(std::span(run.level_indices).first(t + 1), std::span(outcomes).first(t + 1), sc);
        traj.estimates.push_back(a.mu_hat);
        traj.residuals.push_back(std::abs(config.truth.mu_l - a.mu_hat));
        traj.loads.push_back(run.series[t].load);
        traj.outcomes.push_back(run.series[t].outcome);
    }
    return traj;
}

RunTrajectory run_bayesian_arm(const StudyConfig& config, int run_index) {
    const auto run = static_cast<std::uint64_t>(run_index);
    const PriorSpec prior =
        PriorSpec::from_width(config.prior_mean_load(), config.prior_width, FixedSigma{config.truth.sigma_l});
    SimulatorState sim{config.truth, derive_seed(config.seed, run, kSimulatorStream), 0};

    RunTrajectory traj;
    ExperimentSeries series;
    PosteriorGrid grid(prior, config.grid_points, config.truth.sigma_l);
    MapEstimate map = map_estimate(prior, series, config.map_restarts, &grid, config.map_bounds);
    bool degenerate = false;

    for (int t = 0; t < config.n_iterations; ++t) {
        double load = map.mu_hat;
        if (config.method == Method::EntropyAcq && !degenerate) {
            EntropyOptions eo;
            eo.n_samples = config.entropy_samples;
            eo.restarts = config.acquisition_restarts;
            eo.seed = derive_seed(config.seed, run, kEntropyStream + static_cast<std::uint64_t>(t));
            load = acquire_entropy(grid, map, eo);
        }
        const double applied = discretize_load(load, config.discretization);
        auto [outcome, next_sim] = simulate(sim, applied);
        sim = next_sim;
        series.append(applied, outcome);

        if (!degenerate) {
            try {
                grid.add_experiment(applied, outcome);
            } catch (const DegeneratePosterior&) {
                if (!config.allow_degenerate) throw;
                degenerate = true;
            }
        }
        map = map_estimate(prior, series, config.map_restarts, degenerate ? nullptr : &grid, config.map_bounds);

        traj.loads.push_back(applied);
        traj.outcomes.push_back(outcome);
        traj.estimates.push_back(map.mu_hat);
        traj.residuals.push_back(std::abs(config.truth.mu_l - map.mu_hat));
    }
    const double x = std::log10(map.mu_hat);
    traj.divergent = degenerate || x < prior.support_lo() || x > prior.support_hi() ||
                     map_at_support_edge(prior, map, 1e-4);
    return traj;
}

} // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::Staircase: return "staircase";
    case Method::EntropyAcq: return "entropy";
    case Method::MapAcq: return "map";
    }
    return "unknown";
}

Method method_from_string(std::string_view s) {
    if (s == "staircase") return Method::Staircase;
    if (s == "entropy") return Method::EntropyAcq;
    if (s == "map") return Method::MapAcq;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected staircase|entropy|map)");
}

void StudyConfig::validate() const {
    truth.validate();
    if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
    if (n_iterations < 1) throw ConfigError("n_iterations must be >= 1");
    if (!(mean_misspec_pct > -100.0) || !std::isfinite(mean_misspec_pct))
        throw ConfigError("mean misspecification must be > -100 %");
    if (!(prior_width > 1.0) || !std::isfinite(prior_width)) throw ConfigError("prior width must be > 1");
    if (grid_points < 3) throw ConfigError("grid_points must be >= 3");
    if (entropy_samples < 1) throw ConfigError("entropy_samples must be >= 1");
    if (map_restarts < 1 || acquisition_restarts < 1) throw ConfigError("restarts must be >= 1");
}

Profile profile_from_string(std::string_view s) {
    if (s == "paper") return Profile::Paper;
    if (s == "ci") return Profile::Ci;
    throw ConfigError("unknown profile '" + std::string(s) + "' (expected paper|ci)");
}

void apply_profile(StudyConfig& config, Profile profile, bool discretization_study) {
    if (profile == Profile::Paper) {
        config.n_runs = 100;
        config.n_iterations = discretization_study ? 25 : 30;
        config.grid_points = 100000;
    } else {
        config.n_runs = 20;
        config.n_iterations = 15;
        config.grid_points = 10001;
    }
}

std::size_t ConvergenceResult::divergent_runs() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.divergent; }));
}

RunTrajectory run_single(const StudyConfig& config, int run_index) {
    return config.method == Method::Staircase ? run_staircase_arm(config, run_index)
                                              : run_bayesian_arm(config, run_index);
}

ConvergenceResult run_study(const StudyConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();

    ConvergenceResult result;
    result.config = config;
    result.runs.resize(static_cast<std::size_t>(config.n_runs));

    unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(config.n_runs));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (int r = next++; r < config.n_runs && !failed; r = next++) {
            try {
                result.runs[static_cast<std::size_t>(r)] = run_single(config, r);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    const auto iters = static_cast<std::size_t>(config.n_iterations);
    const double n = static_cast<double>(config.n_runs);
    result.mean_residual.assign(iters, 0.0);
    result.std_residual.assign(iters, 0.0);
    for (std::size_t t = 0; t < iters; ++t) {
        double sum = 0.0;
        for (const auto& run : result.runs) sum += run.residuals[t];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& run : result.runs) ss += (run.residuals[t] - mean) * (run.residuals[t] - mean);
        result.mean_residual[t] = mean;
        result.std_residual[t] = config.n_runs > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

DiscretizationComparison run_discretization_study(StudyConfig config) {
    DiscretizationComparison cmp;
    config.discretization = Discretization::None;
    cmp.none = run_study(config);
    config.discretization = Discretization::MinusOne;
    cmp.ten = run_study(config);

    const std::size_t iters = cmp.none.mean_residual.size();
    const double n = static_cast<double>(config.n_runs);
    for (std::size_t t = 0; t < iters; ++t) {
        cmp.mean_difference.push_back(cmp.none.mean_residual[t] - cmp.ten.mean_residual[t]);
        double ss = 0.0;
        for (std::size_t r = 0; r < cmp.none.runs.size(); ++r) {
            const double d = cmp.none.runs[r].residuals[t] - cmp.ten.runs[r].residuals[t];
            ss += (d - cmp.mean_difference.back()) * (d - cmp.mean_difference.back());
        }
        const double sd = config.n_runs > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        cmp.band.push_back(2.0 * sd / std::sqrt(n));
    }
    return cmp;
}

std::string cell_name(const StudyConfig& config) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s_m%+g_w%.3g_%s", std::string(to_string(config.method)).c_str(),
                  config.mean_misspec_pct, config.prior_width, std::string(to_string(config.discretization)).c_str());
    return buf;
}

std::string convergence_csv(const ConvergenceResult& result) {
    std::ostringstream out;
    out << "iteration,mean_residual,std_residual\n";
    for (std::size_t t = 0; t < result.mean_residual.size(); ++t)
        out << t + 1 << ',' << format_double(result.mean_residual[t]) << ',' << format_double(result.std_residual[t])
            << '\n';
    return out.str();
}

std::filesystem::path write_convergence_csv(const ConvergenceResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / (cell_name(result.config) + ".csv");
    std::ofstream(path) << convergence_csv(result);
    return path;
}

std::filesystem::path write_runs_csv(const ConvergenceResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / (cell_name(result.config) + "_runs.csv");
    std::ofstream out(path);
    out << "run,iteration,load,outcome,estimate,residual,divergent\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        const auto& run = result.runs[r];
        for (std::size_t t = 0; t < run.residuals.size(); ++t)
            out << r << ',' << t + 1 << ',' << format_double(run.loads[t]) << ',' << to_string(run.outcomes[t]) << ','
                << format_double(run.estimates[t]) << ',' << format_double(run.residuals[t]) << ','
                << (run.divergent ? 1 : 0) << '\n';
    }
    return path;
}

std::filesystem::path write_discretization_csv(const DiscretizationComparison& cmp, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto cfg = cmp.none.config;
    const auto path = dir / (std::string(to_string(cfg.method)) + "_discretization.csv");
    std::ofstream out(path);
    out << "iteration,mean_residual_none,mean_residual_ten,difference,band\n";
    for (std::size_t t = 0; t < cmp.mean_difference.size(); ++t)
        out << t + 1 << ',' << format_double(cmp.none.mean_residual[t]) << ','
            << format_double(cmp.ten.mean_residual[t]) << ',' << format_double(cmp.mean_difference[t]) << ','
            << format_double(cmp.band[t]) << '\n';
    return path;
}

std::filesystem::path write_manifest(const std::vector<ConvergenceResult>& results, const std::filesystem::path& dir,
                                     const std::string& name) {
    using nlohmann::json;
    std::filesystem::create_directories(dir);
    json cells = json::array();
    for (const auto& r : results) {
        const auto& c = r.config;
        cells.push_back({
            {"file", cell_name(c) + ".csv"},
            {"runs_file", cell_name(c) + "_runs.csv"},
            {"method", to_string(c.method)},
            {"truth", {{"mu_l", c.truth.mu_l}, {"sigma_l", c.truth.sigma_l}}},
            {"mean_misspec_pct", c.mean_misspec_pct},
            {"prior_width", c.prior_width},
            {"prior_std_log10", std::log10(c.prior_width)},
            {"discretization", to_string(c.discretization)},
            {"n_runs", c.n_runs},
            {"n_iterations", c.n_iterations},
            {"seed", c.seed},
            {"grid_points", c.grid_points},
            {"entropy_samples", c.entropy_samples},
            {"divergent_runs", r.divergent_runs()},
            {"final_mean_residual", r.mean_residual.empty() ? 0.0 : r.mean_residual.back()},
            {"wall_seconds", r.wall_seconds},
        });
    }
    const auto path = dir / name;
    std::ofstream(path) << json{{"cells", cells}, {"residual_units", "N"}}.dump(2) << '\n';
    return path;
}

std::string failure_curve_csv(const MaterialParams& params, double lo, double hi, int n) {
    params.validate();
    if (n < 2) throw ConfigError("failure curve needs n >= 2");
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) throw ConfigError("failure curve needs 0 < lo < hi");
    std::vector<double> loads;
    for (int i = 0; i < n; ++i)
        loads.push_back(i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    if (params.mu_l >= lo && params.mu_l <= hi &&
        std::none_of(loads.begin(), loads.end(), [&](double l) { return l == params.mu_l; })) {
        loads.push_back(params.mu_l);
        std::sort(loads.begin(), loads.end());
    }
    std::ostringstream out;
    out << "load,failure_probability\n";
    for (double l : loads) out << format_double(l) << ',' << format_double(failure_probability(params, l)) << '\n';
    return out.str();
}

} // namespace fatigue::study
