#include <doctest.h>

#include "bsmf/measures.hpp"
#include "oracles.hpp"

using namespace bsmf;

TEST_CASE("point-mass reports") {
    ModelParams p = oracles::two_state_reference();

    auto at_c = MeanFieldVector::point_mass(p, p.C);
    PerformanceReport r = performance(at_c, p);
    CHECK(r.mean_bikes == doctest::Approx(static_cast<double>(p.C)));
    CHECK(r.mean_wait_rent == 0.0);
    CHECK(r.mean_wait_return == 0.0);
    CHECK(r.mean_wait_max == 0.0);
    CHECK(r.prob_strong == 0.0);
    CHECK(r.prob_weak == 0.0);

    auto at_floor = MeanFieldVector::point_mass(p, p.floor_level());
    PerformanceReport rf = performance(at_floor, p);
    CHECK(rf.prob_strong == doctest::Approx(1.0));
    CHECK(rf.prob_weak == doctest::Approx(1.0));
    CHECK(rf.mean_wait_rent == doctest::Approx(static_cast<double>(p.L)));
    CHECK(rf.mean_bikes == 0.0);
}

TEST_CASE("double-entry recomputation on the reference fixed point") {
    ModelParams p = oracles::two_state_reference();
    FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
    REQUIRE(fp.converged);
    PerformanceReport r = performance(fp.pi, p);

    // independent re-accumulation of the weighted sums, level by level
    double eq = 0.0, en1 = 0.0, en2 = 0.0, ps = 0.0, pw = 0.0;
    for (int k = p.floor_level(); k <= p.ceiling_level(); ++k) {
        double mass = fp.pi(k, 0) + fp.pi(k, 1);
        if (k >= 1) eq += k * mass;
        if (k <= -1) en1 += -k * mass;
        if (k >= p.K + 1) en2 += (k - p.K) * mass;
        if (k == p.floor_level() || k == p.ceiling_level()) ps += mass;
        if (k <= 0 || k >= p.K) pw += mass;
    }
    CHECK(r.mean_bikes == doctest::Approx(eq).epsilon(1e-14));
    CHECK(r.mean_wait_rent == doctest::Approx(en1).epsilon(1e-14));
    CHECK(r.mean_wait_return == doctest::Approx(en2).epsilon(1e-14));
    CHECK(r.mean_wait_max == doctest::Approx(std::max(en1, en2)).epsilon(1e-14));
    CHECK(r.prob_strong == doctest::Approx(ps).epsilon(1e-14));
    CHECK(r.prob_weak == doctest::Approx(pw).epsilon(1e-14));
}

TEST_CASE("strong probability never exceeds weak probability") {
    ModelParams p = oracles::two_state_reference();
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        auto y = oracles::random_probability_vector(rng, p);
        PerformanceReport r = performance(y, p);
        CHECK(r.prob_strong <= r.prob_weak + 1e-15);
        CHECK(r.prob_weak <= 1.0 + 1e-12);
        CHECK(r.mean_bikes <= p.K + p.L + 1e-12);
        CHECK(r.mean_wait_rent <= p.L + 1e-12);
        CHECK(r.mean_wait_return <= p.L + 1e-12);
    }
}

TEST_CASE("efficiency ratio rejects an L = 0 input") {
    ModelParams p = oracles::two_state_reference();
    p.L = 0;
    CHECK_THROWS_AS(efficiency_ratio(p, AssemblyMode::Standard), Error);
}

TEST_CASE("unused waiting rooms drive the ratio to zero") {
    ModelParams p = oracles::two_state_reference();
    p.alpha = 0.0;
    p.beta = 0.0;
    p.L = 3;
    // boundary levels -L and K+L are unreachable, so the numerator vanishes
    FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
    REQUIRE(fp.converged);
    CHECK(performance(fp.pi, p).prob_strong <= 1e-12);
    double ratio = efficiency_ratio(p, AssemblyMode::Standard);
    CHECK(ratio <= 1e-9);
}

TEST_CASE("waiting rooms shrink the strong probability") {
    ModelParams p = oracles::two_state_reference();
    p.C = 5;
    p.env = EnvironmentSpec::two_state(1.0, 1.0, 45.0, 50.0, 20.0, 20.0);
    p.beta = 0.75;
    p.alpha = 0.5;
    p.L = 4;
    double ratio = efficiency_ratio(p, AssemblyMode::Standard);
    CHECK(ratio > 0.0);
    CHECK(ratio < 1.0);
}
