// study: convergence studies of the staircase method and the Bayesian
// acquisition functions on simulated campaigns.
//
//   study run --method entropy --misspec-pct 75 --prior-width 1.2589 --out out/
//   study grid --profile ci --out out/            all misspec x width cells
//   study discretization --method map --out out/
//   study failure-curve --lo 300 --hi 530 --n 24

#include "fatigue/errors.hpp"
#include "fatigue/study.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

using namespace fatigue;
using namespace fatigue::study;

namespace {

struct CommonArgs {
    std::string profile = "ci";
    std::optional<int> runs;
    std::optional<int> iters;
    std::optional<std::size_t> grid_points;
    std::optional<std::size_t> entropy_samples;
    std::uint64_t seed = 1;
    double mu_l = 400.0;
    double sigma_l = std::pow(10.0, 0.03);
    unsigned threads = 0;
    bool map_extended = false;
    std::string out = "study_out";
    bool quiet = false;
};

void add_common(CLI::App* app, CommonArgs& a) {
    app->add_option("--profile", a.profile, "full scale (paper: 100 runs, 100k grid) or ci (20 runs, 10,001 grid)")
        ->check(CLI::IsMember({"paper", "ci"}));
    app->add_option("--runs", a.runs, "Monte Carlo runs (overrides the profile)")->check(CLI::PositiveNumber);
    app->add_option("--iters", a.iters, "experiments per run (overrides the profile)")->check(CLI::PositiveNumber);
    app->add_option("--grid-points", a.grid_points, "posterior grid size")->check(CLI::Range(3, 10000000));
    app->add_option("--entropy-samples", a.entropy_samples, "posterior samples for the entropy estimate")
        ->check(CLI::PositiveNumber);
    app->add_option("--seed", a.seed, "study seed");
    app->add_option("--truth-mu", a.mu_l, "true mean fatigue strength, N")->check(CLI::PositiveNumber);
    app->add_option("--truth-sigma", a.sigma_l, "true multiplicative scatter (> 1)");
    app->add_option("--threads", a.threads, "worker threads, 0 = all cores");
    app->add_flag("--map-extended", a.map_extended, "let the MAP leave the prior support (one decade past the data)");
    app->add_option("--out", a.out, "output directory");
    app->add_flag("--quiet", a.quiet, "no progress lines");
}

StudyConfig base_config(const CommonArgs& a, bool discretization_study) {
    StudyConfig c;
    apply_profile(c, profile_from_string(a.profile), discretization_study);
    if (a.runs) c.n_runs = *a.runs;
    if (a.iters) c.n_iterations = *a.iters;
    if (a.grid_points) c.grid_points = *a.grid_points;
    if (a.entropy_samples) c.entropy_samples = *a.entropy_samples;
    c.seed = a.seed;
    c.truth = {a.mu_l, a.sigma_l};
    c.threads = a.threads;
    c.map_bounds = a.map_extended ? MapBounds::Extended : MapBounds::PriorSupport;
    return c;
}

void report(const ConvergenceResult& r, bool quiet) {
    if (quiet) return;
    std::cerr << cell_name(r.config) << ": final mean residual " << r.mean_residual.back() << " N (std "
              << r.std_residual.back() << "), divergent " << r.divergent_runs() << "/" << r.config.n_runs << ", "
              << r.wall_seconds << " s\n";
}

ConvergenceResult run_and_write(const StudyConfig& c, const std::string& out, bool quiet) {
    auto r = run_study(c);
    write_convergence_csv(r, out);
    write_runs_csv(r, out);
    report(r, quiet);
    return r;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convergence studies for sequential fatigue strength estimation"};
    app.require_subcommand(1);

    CommonArgs run_args;
    std::string method = "entropy";
    double misspec = 0.0, width = 10.0;
    std::string discretize = "none";
    bool strict = false;
    auto* run = app.add_subcommand("run", "one (method, misspecification, width, discretization) cell");
    add_common(run, run_args);
    run->add_option("--method", method, "staircase|entropy|map")->check(CLI::IsMember({"staircase", "entropy", "map"}));
    run->add_option("--misspec-pct", misspec, "prior mean misspecification in percent of the true mean");
    run->add_option("--prior-width", width, "prior width; the log10 prior std is log10(width)");
    run->add_option("--discretize", discretize, "none|ten")->check(CLI::IsMember({"none", "ten"}));
    run->add_flag("--abort-on-degenerate", strict, "abort (exit 3) instead of flagging degenerate runs");

    CommonArgs grid_args;
    std::vector<double> misspecs{-75.0, 0.0, 75.0};
    std::vector<double> widths{std::pow(10.0, 0.1), 10.0, 1e10};
    auto* grid = app.add_subcommand("grid", "every misspecification x width cell for all three methods");
    add_common(grid, grid_args);
    grid->add_option("--misspecs", misspecs, "misspecification percentages");
    grid->add_option("--widths", widths, "prior widths");

    CommonArgs disc_args;
    std::vector<std::string> disc_methods{"staircase", "entropy", "map"};
    double disc_width = 1e10, disc_misspec = 0.0;
    auto* disc = app.add_subcommand("discretization", "paired none vs ten comparison with common random numbers");
    add_common(disc, disc_args);
    disc->add_option("--methods", disc_methods, "methods to compare");
    disc->add_option("--prior-width", disc_width, "prior width");
    disc->add_option("--misspec-pct", disc_misspec, "prior mean misspecification in percent");

    double lo = 300.0, hi = 530.0, mu = 400.0, sigma = std::pow(10.0, 0.03);
    int n = 24;
    std::string curve_out;
    auto* curve = app.add_subcommand("failure-curve", "load,failure_probability rows");
    curve->add_option("--lo", lo, "lowest load, N");
    curve->add_option("--hi", hi, "highest load, N");
    curve->add_option("--n", n, "number of equidistant loads");
    curve->add_option("--mu", mu, "mean fatigue strength, N");
    curve->add_option("--sigma", sigma, "multiplicative scatter");
    curve->add_option("--out", curve_out, "CSV file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            auto c = base_config(run_args, false);
            c.method = method_from_string(method);
            c.mean_misspec_pct = misspec;
            c.prior_width = width;
            c.discretization = discretization_from_string(discretize);
            c.allow_degenerate = !strict;
            const auto r = run_and_write(c, run_args.out, run_args.quiet);
            write_manifest({r}, run_args.out, cell_name(c) + "_manifest.json");
        } else if (*grid) {
            std::vector<ConvergenceResult> results;
            for (double m : misspecs) {
                // The staircase has no prior width; one run per misspecification.
                auto c = base_config(grid_args, false);
                c.method = Method::Staircase;
                c.mean_misspec_pct = m;
                c.prior_width = widths.front();
                results.push_back(run_and_write(c, grid_args.out, grid_args.quiet));
                for (double w : widths) {
                    for (auto meth : {Method::EntropyAcq, Method::MapAcq}) {
                        c.method = meth;
                        c.prior_width = w;
                        results.push_back(run_and_write(c, grid_args.out, grid_args.quiet));
                    }
                }
            }
            write_manifest(results, grid_args.out);
        } else if (*disc) {
            std::vector<ConvergenceResult> results;
            for (const auto& m : disc_methods) {
                auto c = base_config(disc_args, true);
                c.method = method_from_string(m);
                c.prior_width = disc_width;
                c.mean_misspec_pct = disc_misspec;
                auto cmp = run_discretization_study(c);
                write_convergence_csv(cmp.none, disc_args.out);
                write_convergence_csv(cmp.ten, disc_args.out);
                write_discretization_csv(cmp, disc_args.out);
                report(cmp.none, disc_args.quiet);
                report(cmp.ten, disc_args.quiet);
                if (!disc_args.quiet)
                    std::cerr << m << ": final difference " << cmp.mean_difference.back() << " +/- "
                              << cmp.band.back() << " N\n";
                results.push_back(std::move(cmp.none));
                results.push_back(std::move(cmp.ten));
            }
            write_manifest(results, disc_args.out, "discretization_manifest.json");
        } else if (*curve) {
            const auto csv = failure_curve_csv({mu, sigma}, lo, hi, n);
            if (curve_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream f(curve_out);
                if (!f) throw ConfigError("cannot write " + curve_out);
                f << csv;
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DegeneratePosterior& e) {
        std::cerr << "degenerate posterior: " << e.what() << "; widen the prior\n";
        return 3;
    }
    return 0;
}
