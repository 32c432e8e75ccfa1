#include "fatigue/errors.hpp"
#include "fatigue/staircase.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

using namespace fatigue;
using boost::multiprecision::cpp_bin_float_50;

namespace {

const double kD = std::pow(10.0, 0.03);

StaircaseConfig lab_config() {
    StaircaseConfig c;
    c.l_ini = 400.0;
    c.d = kD;
    return c;
}

// Independent reading of the three validity rules, no trimming shortcuts:
// find the first position whose level recurs, then check the rest.
struct BruteVerdict {
    bool revisit = false, three_levels = false, two_turns = false;
    bool valid() const { return revisit && three_levels && two_turns; }
};

BruteVerdict brute_validity(const std::vector<int>& lv, const std::vector<Outcome>& oc) {
    BruteVerdict v;
    std::size_t start = lv.size();
    for (std::size_t s = 0; s < lv.size() && start == lv.size(); ++s)
        for (std::size_t t = s + 1; t < lv.size(); ++t)
            if (lv[t] == lv[s]) {
                start = s;
                break;
            }
    v.revisit = start < lv.size();
    const std::size_t from = v.revisit ? start : 0;
    std::set<int> levels;
    int turns = 0;
    for (std::size_t i = from; i < lv.size(); ++i) {
        levels.insert(lv[i]);
        if (i > from && oc[i] != oc[i - 1]) ++turns;
    }
    v.three_levels = levels.size() >= 3;
    v.two_turns = turns >= 2;
    return v;
}

} // namespace

TEST_CASE("sequential integer levels reproduce the lab set") {
    const auto levels = generate_levels(lab_config(), -3, 3);
    CHECK(levels == std::vector<double>{325, 348, 373, 400, 429, 460, 493});
}

TEST_CASE("exact geometric levels") {
    StaircaseConfig c = lab_config();
    c.level_rounding = LevelRounding::ExactGeometric;
    c.d = 2.0;
    CHECK(generate_levels(c, -1, 1) == std::vector<double>{200, 400, 800});

    c.d = kD;
    const auto levels = generate_levels(c, 0, 2);
    const cpp_bin_float_50 d = boost::multiprecision::pow(cpp_bin_float_50(10), cpp_bin_float_50("0.03"));
    for (int i = 0; i <= 2; ++i) {
        const double ref = static_cast<double>(400 * boost::multiprecision::pow(d, i));
        CHECK(levels[static_cast<std::size_t>(i)] == doctest::Approx(ref).epsilon(1e-14));
    }
    CHECK(levels[1] == doctest::Approx(428.61).epsilon(1e-5));
    CHECK(levels[2] == doctest::Approx(459.26).epsilon(1e-5));
}

TEST_CASE("level range errors") {
    CHECK_THROWS_AS(generate_levels(lab_config(), 2, 1), DomainError);
    CHECK_THROWS_AS(generate_levels(lab_config(), 1, 3), DomainError);
    StaircaseConfig bad = lab_config();
    bad.d = 1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("level lookup tolerates half a newton") {
    const auto c = lab_config();
    CHECK(level_index_of(c, 429.0) == 1);
    CHECK(level_index_of(c, 428.6) == 1);
    CHECK(level_index_of(c, 325.0) == -3);
    CHECK_THROWS_AS(level_index_of(c, 415.0), DomainError);
}

TEST_CASE("next level rule") {
    CHECK(next_level(0, Outcome::Failure) == -1);
    CHECK(next_level(0, Outcome::Runout) == 1);
    CHECK(next_level(5, Outcome::Failure) == 4);
}

TEST_CASE("a single experiment sits at the initial load") {
    const auto [series, sim] = run_staircase(lab_config(), {{400.0, kD}, 1, 0}, 1);
    REQUIRE(series.size() == 1);
    CHECK(series[0].load == 400.0);
    CHECK(sim.draws == 1);
}

TEST_CASE("protocol soundness over many seeds") {
    const auto c = lab_config();
    const std::set<double> lab{325, 348, 373, 400, 429, 460, 493};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto run = run_staircase_levels(c, {{400.0, kD}, seed, 0}, 25);
        REQUIRE(run.series.size() == 25);
        CHECK(run.level_indices.front() == 0);
        for (std::size_t t = 0; t + 1 < run.series.size(); ++t)
            CHECK(run.level_indices[t + 1] == next_level(run.level_indices[t], run.series[t].outcome));
        for (std::size_t t = 0; t < run.series.size(); ++t) {
            CHECK(level_index_of(c, run.series[t].load) == run.level_indices[t]);
            if (std::abs(run.level_indices[t]) <= 3) CHECK(lab.count(run.series[t].load) == 1);
        }
    }
}

TEST_CASE("one-sided truth gives a monotone ascent") {
    const auto run = run_staircase_levels(lab_config(), {{1e6, kD}, 3, 0}, 20);
    for (std::size_t t = 0; t < run.series.size(); ++t) {
        CHECK(run.series[t].outcome == Outcome::Runout);
        CHECK(run.level_indices[t] == static_cast<int>(t));
    }
    const auto a = analyze_staircase(run.series, lab_config());
    CHECK_FALSE(a.valid);
    CHECK(a.mu_hat == 400.0);
}

TEST_CASE("validity matches the brute force checker on every pattern up to length 8") {
    // Every outcome pattern defines a protocol path from level 0; afterwards
    // arbitrary level sequences over three levels are fed as well.
    const auto c = lab_config();
    int checked = 0;
    for (int n = 1; n <= 8; ++n) {
        for (int mask = 0; mask < (1 << n); ++mask) {
            std::vector<Outcome> oc(static_cast<std::size_t>(n));
            std::vector<int> lv(static_cast<std::size_t>(n));
            int level = 0;
            for (int i = 0; i < n; ++i) {
                oc[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? Outcome::Failure : Outcome::Runout;
                lv[static_cast<std::size_t>(i)] = level;
                level = next_level(level, oc[static_cast<std::size_t>(i)]);
            }
            const auto a = analyze_levels(lv, oc, c);
            const auto b = brute_validity(lv, oc);
            CHECK(a.valid == b.valid());
            const auto has = [&](InvalidityReason r) {
                return std::find(a.invalidity_reasons.begin(), a.invalidity_reasons.end(), r) !=
                       a.invalidity_reasons.end();
            };
            CHECK(has(InvalidityReason::InitialLoadNotRevisited) == !b.revisit);
            CHECK(has(InvalidityReason::FewerThanThreeLevels) == !b.three_levels);
            CHECK(has(InvalidityReason::FewerThanTwoTurningPoints) == !b.two_turns);
            if (!a.valid) CHECK(a.mu_hat == c.l_ini);
            ++checked;
        }
    }
    CHECK(checked == 510);

    // Arbitrary level sequences over three levels, length 8, fixed outcome pattern.
    const std::vector<Outcome> oc{Outcome::Runout,  Outcome::Failure, Outcome::Runout, Outcome::Failure,
                                  Outcome::Failure, Outcome::Runout,  Outcome::Runout, Outcome::Failure};
    for (int code = 0; code < 6561; ++code) {
        std::vector<int> lv(8);
        int x = code;
        for (int i = 0; i < 8; ++i, x /= 3) lv[static_cast<std::size_t>(i)] = x % 3 - 1;
        CHECK(analyze_levels(lv, oc, c).valid == brute_validity(lv, oc).valid());
    }
}

TEST_CASE("two levels only is invalid with the fallback estimate") {
    ExperimentSeries s;
    for (int i = 0; i < 6; ++i) s.append(i % 2 ? 429.0 : 400.0, i % 2 ? Outcome::Failure : Outcome::Runout);
    const auto a = analyze_staircase(s, lab_config());
    CHECK_FALSE(a.valid);
    CHECK(std::count(a.invalidity_reasons.begin(), a.invalidity_reasons.end(),
                     InvalidityReason::FewerThanThreeLevels) == 1);
    CHECK(a.mu_hat == 400.0);
}

TEST_CASE("estimators on a hand-built series") {
    // L_0 = 373 with counts {0: 2, 1: 3, 2: 1}.
    const std::vector<int> lv{0, -1, 0, 1, 0, -1};
    const std::vector<Outcome> oc{Outcome::Failure, Outcome::Runout, Outcome::Runout,
                                  Outcome::Failure, Outcome::Failure, Outcome::Runout};
    auto c = lab_config();
    c.estimator = StaircaseEstimator::LiteralIndexMean;
    const auto lit = analyze_levels(lv, oc, c);
    REQUIRE(lit.valid);
    CHECK(lit.l0 == 373.0);
    CHECK(lit.level_counts == std::map<int, int>{{0, 2}, {1, 3}, {2, 1}});
    CHECK(lit.mu_hat == doctest::Approx(373.0 * 5.0 / 6.0).epsilon(1e-14));
    CHECK(lit.mu_hat == doctest::Approx(310.8).epsilon(1e-3));

    c.estimator = StaircaseEstimator::GeometricInterpolation;
    const auto geo = analyze_levels(lv, oc, c);
    CHECK(geo.mu_hat == doctest::Approx(373.0 * std::pow(kD, 5.0 / 6.0)).epsilon(1e-14));
}

TEST_CASE("analysis is a pure function") {
    const auto run = run_staircase_levels(lab_config(), {{400.0, kD}, 77, 0}, 30);
    const auto a = analyze_staircase(run.series, lab_config());
    const auto b = analyze_staircase(run.series, lab_config());
    CHECK(a.mu_hat == b.mu_hat);
    CHECK(a.level_counts == b.level_counts);
    CHECK(a.valid == b.valid);
}

TEST_CASE("off-lattice loads are rejected by the analysis") {
    ExperimentSeries s;
    s.append(400.0, Outcome::Failure);
    s.append(380.0, Outcome::Runout);
    CHECK_THROWS_AS(analyze_staircase(s, lab_config()), DomainError);
}
