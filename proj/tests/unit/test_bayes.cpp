#include "fatigue/bayes.hpp"
#include "fatigue/discretize.hpp"
#include "fatigue/errors.hpp"
#include "fatigue/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace fatigue;

namespace {

const double kSigma = std::pow(10.0, 0.03);

struct Case {
    PriorSpec prior;
    ExperimentSeries series;
    std::vector<oracle::Obs> obs;
};

Case random_case(SplitMix64& rng) {
    Case c;
    const double mean_load = 150.0 + 600.0 * rng.uniform();
    const double width = std::pow(10.0, 0.05 + 0.95 * rng.uniform());
    c.prior = PriorSpec::from_width(mean_load, width, FixedSigma{kSigma});
    const int n = static_cast<int>(rng.uniform() * 6.0);
    for (int i = 0; i < n; ++i) {
        const double x = c.prior.support_lo() + (c.prior.support_hi() - c.prior.support_lo()) * rng.uniform();
        const double load = std::pow(10.0, x);
        const bool fail = rng.uniform() < 0.5;
        c.series.append(load, fail ? Outcome::Failure : Outcome::Runout);
        c.obs.push_back({load, fail});
    }
    return c;
}

double mean_of_density(const PosteriorGrid& g) {
    return posterior_std(g).mean_log10;
}

} // namespace

TEST_CASE("log posterior matches the pointwise oracle") {
    SplitMix64 rng(21);
    for (int t = 0; t < 100; ++t) {
        const auto c = random_case(rng);
        for (int k = 0; k < 5; ++k) {
            const double x = c.prior.support_lo() + (c.prior.support_hi() - c.prior.support_lo()) * rng.uniform();
            const double ref = oracle::log_posterior(x, c.prior.mu_prior.mean_log10, c.prior.mu_prior.std_log10,
                                                     std::log10(kSigma), c.obs);
            const double got = log_posterior(c.prior, c.series, std::pow(10.0, x), kSigma);
            CHECK(got == doctest::Approx(ref).epsilon(1e-9));
        }
    }
}

TEST_CASE("grid argmax and MAP agree with a million point brute force") {
    SplitMix64 rng(22);
    for (int t = 0; t < 100; ++t) {
        const auto c = random_case(rng);
        const auto grid = evaluate_grid(c.prior, c.series, 10001);
        const auto [bx, bv] =
            oracle::brute_force_argmax(c.prior.support_lo(), c.prior.support_hi(), 1000000,
                                       c.prior.mu_prior.mean_log10, c.prior.mu_prior.std_log10, std::log10(kSigma),
                                       c.obs);
        CHECK(std::abs(grid.mu_log10()[grid.argmax()] - bx) <= grid.spacing());
        const auto map = map_estimate(c.prior, c.series, 8, &grid);
        CHECK(map.log_posterior_at_map >= grid.max_log_value() - 1e-9);
        CHECK(map.log_posterior_at_map >= bv - 1e-9);
    }
}

TEST_CASE("empty series std is the truncated normal std") {
    const double factor = oracle::truncated_normal_std_factor(2.0);
    CHECK(factor == doctest::Approx(0.8796).epsilon(1e-4));
    for (double width : {std::pow(10.0, 0.1), 10.0, 1e10}) {
        const auto prior = PriorSpec::from_width(400.0, width);
        const auto m = posterior_std(evaluate_grid(prior, ExperimentSeries{}, 10001));
        CHECK(m.std_log10 == doctest::Approx(factor * std::log10(width)).epsilon(0.01));
        CHECK(m.mean_log10 == doctest::Approx(std::log10(400.0)).epsilon(1e-9));
    }
}

TEST_CASE("normalised density ignores additive log constants") {
    SplitMix64 rng(23);
    const auto c = random_case(rng);
    auto grid = evaluate_grid(c.prior, c.series, 2001);
    const auto before = grid.density();
    const auto m0 = posterior_std(grid);
    grid.shift(-750.0);
    const auto after = grid.density();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
    CHECK(posterior_std(grid).std_log10 == doctest::Approx(m0.std_log10).epsilon(1e-12));

    // Trapezoidal integral of the density is one.
    double integral = 0.0;
    for (std::size_t i = 0; i < after.size(); ++i)
        integral += (i == 0 || i + 1 == after.size() ? 0.5 : 1.0) * after[i] * grid.spacing();
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a failure moves the posterior down, a runout moves it up") {
    const auto prior = PriorSpec::from_width(400.0, 10.0);
    const double m0 = mean_of_density(evaluate_grid(prior, {}, 10001));
    SplitMix64 rng(24);
    for (int t = 0; t < 50; ++t) {
        const double load = 100.0 + 900.0 * rng.uniform();
        ExperimentSeries f, r;
        f.append(load, Outcome::Failure);
        r.append(load, Outcome::Runout);
        CHECK(mean_of_density(evaluate_grid(prior, f, 10001)) < m0);
        CHECK(mean_of_density(evaluate_grid(prior, r, 10001)) > m0);
    }
}

TEST_CASE("incremental grid updates equal a fresh evaluation") {
    SplitMix64 rng(25);
    const auto c = random_case(rng);
    PosteriorGrid g(c.prior, 501, kSigma);
    for (const auto& r : c.series.records()) g.add_experiment(r.load, r.outcome);
    const auto fresh = evaluate_grid(c.prior, c.series, 501);
    for (std::size_t i = 0; i < g.n_points(); ++i)
        CHECK(g.log_values()[i] == doctest::Approx(fresh.log_values()[i]).epsilon(1e-12));
}

TEST_CASE("MAP with a uniform sigma prior dominates a coarse two dimensional scan") {
    const PriorSpec prior = PriorSpec::from_width(400.0, 10.0, UniformSigma{0.005, 0.2});
    ExperimentSeries s;
    SplitMix64 rng(5);
    for (double load : {400.0, 429.0, 373.0, 400.0, 460.0, 348.0, 410.0, 390.0})
        s.append(load, rng.uniform() < oracle::failure_probability(400.0, kSigma, load) ? Outcome::Failure
                                                                                         : Outcome::Runout);
    const auto map = map_estimate(prior, s);
    CHECK(std::log10(map.sigma_hat) >= 0.005 - 1e-12);
    CHECK(std::log10(map.sigma_hat) <= 0.2 + 1e-12);
    double best = -INFINITY;
    for (int i = 0; i <= 200; ++i)
        for (int j = 0; j <= 60; ++j) {
            const double x = prior.support_lo() + (prior.support_hi() - prior.support_lo()) * i / 200.0;
            const double sl = 0.006 + (0.2 - 0.006) * j / 60.0;
            best = std::max(best, log_posterior(prior, s, std::pow(10.0, x), std::pow(10.0, sl)));
        }
    CHECK(map.log_posterior_at_map >= best - 1e-9);
}

TEST_CASE("MAP of a tight prior far from the data sits on the support edge") {
    const auto prior = PriorSpec::from_width(700.0, std::pow(10.0, 0.1));
    ExperimentSeries s;
    for (int i = 0; i < 10; ++i) s.append(400.0, Outcome::Failure);
    const auto pinned = map_estimate(prior, s);
    CHECK(map_at_support_edge(prior, pinned, 1e-4));
    const auto free = map_estimate(prior, s, 8, nullptr, MapBounds::Extended);
    CHECK(free.mu_hat < pinned.mu_hat);
    CHECK(free.log_posterior_at_map >= pinned.log_posterior_at_map);
}

TEST_CASE("prior validation") {
    CHECK_THROWS_AS(PriorSpec::from_width(400.0, 1.0).validate(), DomainError);
    CHECK_THROWS_AS(PriorSpec::from_width(-1.0, 10.0).validate(), DomainError);
    CHECK_THROWS_AS(log_posterior(PriorSpec::from_width(400.0, 10.0), {}, 400.0, 1.0), DomainError);
    CHECK_THROWS_AS(PosteriorGrid(PriorSpec::from_width(400.0, 10.0), 2, kSigma), DomainError);
}

TEST_CASE("entropy acquisition") {
    const auto prior = PriorSpec::from_width(400.0, 10.0);
    ExperimentSeries s;
    s.append(400.0, Outcome::Failure);
    s.append(300.0, Outcome::Runout);
    const auto grid = evaluate_grid(prior, s, 10001);
    const auto map = map_estimate(prior, s, 8, &grid);
    const double current_h = [&] {
        const auto d = grid.density();
        double h = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d[i] > 0.0) h -= (i == 0 || i + 1 == d.size() ? 0.5 : 1.0) * d[i] * std::log(d[i]) * grid.spacing();
        return h;
    }();

    EntropyOptions exact;
    exact.estimator = EntropyEstimator::ExactGrid;
    const EntropyAcquisition ex(grid, map, exact);
    EntropyOptions sampled;
    sampled.seed = 3;
    const EntropyAcquisition sa(grid, map, sampled);

    SUBCASE("exact branch entropy of an uninformative load equals the current entropy") {
        CHECK(ex.branch_entropy(1e6, Outcome::Failure) == doctest::Approx(current_h).epsilon(1e-6));
        CHECK(ex.branch_entropy(1e-2, Outcome::Runout) == doctest::Approx(current_h).epsilon(1e-6));
    }

    SUBCASE("sampled and exact estimators agree") {
        // Unlikely branches carry few effective samples, so branch entropies
        // are compared at a larger sample size than the expected value.
        EntropyOptions many = sampled;
        many.n_samples = 100000;
        const EntropyAcquisition big(grid, map, many);
        for (double load : {280.0, 330.0, 360.0, 400.0, 450.0}) {
            for (Outcome o : {Outcome::Failure, Outcome::Runout})
                CHECK(std::abs(big.branch_entropy(load, o) - ex.branch_entropy(load, o)) < 0.05);
            CHECK(std::abs(sa.value(load) - ex.value(load)) < 0.05);
        }
    }

    SUBCASE("expected entropy never exceeds the current entropy") {
        for (double load = 250.0; load <= 500.0; load += 10.0) CHECK(-ex.value(load) <= current_h + 1e-9);
    }

    SUBCASE("maximiser lies inside the support and beats the tested loads") {
        const double best = sa.argmax();
        CHECK(std::log10(best) >= grid.support_lo());
        CHECK(std::log10(best) <= grid.support_hi());
        CHECK(ex.value(best) >= ex.value(400.0) - 1e-3);
        CHECK(ex.value(best) >= ex.value(300.0) - 1e-3);
    }

    SUBCASE("continuous search is not worse than the discrete scan on a coarse lattice") {
        EntropyOptions disc = exact;
        disc.search = AcquisitionSearch::Discrete;
        for (double l = 200.0; l <= 600.0; l += 5.0) disc.candidates.push_back(l);
        const EntropyAcquisition d(grid, map, disc);
        const double l_disc = d.argmax();
        CHECK(std::find(disc.candidates.begin(), disc.candidates.end(), l_disc) != disc.candidates.end());
        CHECK(ex.value(ex.argmax()) >= ex.value(l_disc) - 1e-6);
    }

    SUBCASE("same seed, same recommendation") {
        CHECK(acquire_entropy(grid, map, sampled) == acquire_entropy(grid, map, sampled));
    }
}

TEST_CASE("discretization") {
    CHECK(discretize_load(404.9, Discretization::MinusOne) == 400.0);
    CHECK(discretize_load(405.0, Discretization::MinusOne) == 410.0);
    CHECK(discretize_load(3.0, Discretization::MinusOne) == 10.0);
    CHECK(discretize_load(404.9, Discretization::None) == 404.9);
    CHECK_THROWS_AS(discretize_load(0.0, Discretization::MinusOne), DomainError);
    CHECK(discretization_from_string("ten") == Discretization::MinusOne);
    CHECK(discretization_from_string("none") == Discretization::None);
    CHECK_THROWS_AS(discretization_from_string("hundred"), ConfigError);
}
