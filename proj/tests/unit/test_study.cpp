#include "fatigue/errors.hpp"
#include "fatigue/study.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <string>

using namespace fatigue;
using namespace fatigue::study;

namespace {

StudyConfig small(Method m) {
    StudyConfig c;
    c.method = m;
    c.n_runs = 3;
    c.n_iterations = 6;
    c.grid_points = 1001;
    c.entropy_samples = 1000;
    c.seed = 4;
    c.threads = 2;
    return c;
}

} // namespace

TEST_CASE("studies are reproducible and shaped by the config") {
    for (Method m : {Method::Staircase, Method::MapAcq, Method::EntropyAcq}) {
        const auto cfg = small(m);
        const auto a = run_study(cfg);
        const auto b = run_study(cfg);
        REQUIRE(a.mean_residual.size() == 6);
        REQUIRE(a.runs.size() == 3);
        CHECK(a.mean_residual == b.mean_residual);
        for (std::size_t r = 0; r < a.runs.size(); ++r) {
            CHECK(a.runs[r].loads == b.runs[r].loads);
            CHECK(a.runs[r].residuals.size() == 6);
            for (std::size_t t = 0; t < 6; ++t)
                CHECK(a.runs[r].residuals[t] == doctest::Approx(std::abs(400.0 - a.runs[r].estimates[t])));
        }
        // Mean over runs matches the per-run trajectories.
        for (std::size_t t = 0; t < 6; ++t) {
            double s = 0.0;
            for (const auto& run : a.runs) s += run.residuals[t];
            CHECK(a.mean_residual[t] == doctest::Approx(s / 3.0));
        }
        // A single run does not depend on the thread count or on the other runs.
        auto one = cfg;
        one.threads = 1;
        CHECK(run_single(one, 2).loads == a.runs[2].loads);
    }
}

TEST_CASE("runs draw independent outcome streams") {
    auto cfg = small(Method::MapAcq);
    cfg.n_runs = 10;
    cfg.n_iterations = 15;
    const auto res = run_study(cfg);
    std::set<std::vector<Outcome>> distinct;
    for (const auto& run : res.runs) distinct.insert(run.outcomes);
    // Ten equal 15-outcome sequences by chance are vanishingly unlikely.
    CHECK(distinct.size() >= 8);
}

TEST_CASE("staircase arm follows the protocol from the misspecified mean") {
    auto cfg = small(Method::Staircase);
    cfg.mean_misspec_pct = 75.0;
    const auto run = run_single(cfg, 0);
    CHECK(run.loads.front() == 700.0);
    for (std::size_t t = 0; t + 1 < run.loads.size(); ++t) {
        const double ratio = run.loads[t + 1] / run.loads[t];
        if (run.outcomes[t] == Outcome::Failure) CHECK(ratio < 1.0);
        else CHECK(ratio > 1.0);
    }
}

TEST_CASE("discretization arms use common random numbers") {
    auto cfg = small(Method::MapAcq);
    const auto cmp = run_discretization_study(cfg);
    REQUIRE(cmp.mean_difference.size() == 6);
    for (const auto& run : cmp.ten.runs)
        for (double l : run.loads) CHECK(std::fmod(l, 10.0) == 0.0);
    // First load is the prior mode in both arms: 400 is already a multiple of ten.
    for (std::size_t r = 0; r < cmp.none.runs.size(); ++r) {
        CHECK(cmp.none.runs[r].loads.front() == doctest::Approx(400.0).epsilon(1e-6));
        CHECK(cmp.ten.runs[r].loads.front() == 400.0);
        CHECK(cmp.none.runs[r].outcomes.front() == cmp.ten.runs[r].outcomes.front());
    }
    for (std::size_t t = 0; t < 6; ++t) {
        CHECK(cmp.mean_difference[t] == doctest::Approx(cmp.none.mean_residual[t] - cmp.ten.mean_residual[t]));
        CHECK(cmp.band[t] >= 0.0);
    }
}

TEST_CASE("profiles") {
    StudyConfig c;
    apply_profile(c, Profile::Ci, false);
    CHECK(c.n_runs == 20);
    CHECK(c.grid_points == 10001);
    apply_profile(c, Profile::Paper, true);
    CHECK(c.n_runs == 100);
    CHECK(c.n_iterations == 25);
    CHECK(c.grid_points == 100000);
    apply_profile(c, Profile::Paper, false);
    CHECK(c.n_iterations == 30);
    CHECK_THROWS_AS(profile_from_string("huge"), ConfigError);
}

TEST_CASE("invalid study configs") {
    auto c = small(Method::MapAcq);
    c.n_runs = 0;
    CHECK_THROWS_AS(run_study(c), ConfigError);
    c = small(Method::MapAcq);
    c.prior_width = 1.0;
    CHECK_THROWS_AS(run_study(c), ConfigError);
    c = small(Method::MapAcq);
    c.mean_misspec_pct = -100.0;
    CHECK_THROWS_AS(run_study(c), ConfigError);
    CHECK_THROWS_AS(method_from_string("bisection"), ConfigError);
}

TEST_CASE("failure curve rows") {
    const MaterialParams truth{400.0, std::pow(10.0, 0.03)};
    std::istringstream in(failure_curve_csv(truth, 300.0, 500.0, 8));
    std::string line;
    std::getline(in, line);
    CHECK(line == "load,failure_probability");
    int rows = 0;
    bool median_seen = false;
    double prev = -1.0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        const double load = std::stod(line.substr(0, comma));
        const double p = std::stod(line.substr(comma + 1));
        CHECK(p == doctest::Approx(oracle::failure_probability(400.0, truth.sigma_l, load)).epsilon(1e-9));
        CHECK(load > prev);
        prev = load;
        if (load == 400.0) {
            median_seen = true;
            CHECK(p == 0.5);
        }
        ++rows;
    }
    CHECK(rows == 9);
    CHECK(median_seen);
    CHECK_THROWS_AS(failure_curve_csv(truth, 500.0, 300.0, 8), ConfigError);
}

TEST_CASE("cell names") {
    auto c = small(Method::EntropyAcq);
    c.mean_misspec_pct = -75.0;
    c.prior_width = 10.0;
    CHECK(cell_name(c) == "entropy_m-75_w10_none");
}
