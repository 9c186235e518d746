#include <doctest.h>

#include "bsmf/env.hpp"
#include "oracles.hpp"

using namespace bsmf;

TEST_CASE("seven-part day produces duration-ratio stationary vector") {
    auto seg = DaySegmentation::seven_part_day();
    auto env = build_cyclic_generator(seg);

    REQUIRE(env.m == 7);
    const double expected[] = {7, 2, 3, 2.5, 3.5, 2, 4};
    for (int i = 0; i < 7; ++i)
        CHECK(env.theta[i] == doctest::Approx(expected[i] / 24.0).epsilon(1e-12));

    // sojourn rates x_i = theta_7 / theta_i, last pinned to 1
    const double x_expected[] = {4.0 / 7, 2.0, 4.0 / 3, 8.0 / 5, 8.0 / 7, 2.0, 1.0};
    for (int i = 0; i < 7; ++i)
        CHECK(-env.W(i, i) == doctest::Approx(x_expected[i]).epsilon(1e-12));
    CHECK(-env.W(6, 6) == doctest::Approx(1.0));

    // theta W = 0 within 1e-12
    CHECK((env.theta.transpose() * env.W).lpNorm<Eigen::Infinity>() <= 1e-12);

    // agreement with the dense null-space oracle
    Eigen::VectorXd oracle = oracles::dense_stationary(env.W);
    CHECK((oracle - env.theta).lpNorm<Eigen::Infinity>() <= 1e-12);
    for (int i = 0; i < 7; ++i)
        CHECK(oracle[6] / oracle[i] == doctest::Approx(x_expected[i]).epsilon(1e-10));
}

TEST_CASE("equal-duration segments give a uniform cyclic environment") {
    DaySegmentation seg;
    for (int i = 0; i < 6; ++i)
        seg.segments.push_back({{4.0 * i, 4.0 * (i + 1)}});
    auto env = build_cyclic_generator(seg);
    for (int i = 0; i < 6; ++i) {
        CHECK(env.theta[i] == doctest::Approx(1.0 / 6).epsilon(1e-12));
        CHECK(-env.W(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("cyclic construction rejects bad segmentations") {
    DaySegmentation empty_gap;
    empty_gap.segments = {{{0.0, 10.0}}, {{12.0, 24.0}}};
    CHECK_THROWS_AS(build_cyclic_generator(empty_gap), Error);

    DaySegmentation overlap;
    overlap.segments = {{{0.0, 14.0}}, {{12.0, 24.0}}};
    CHECK_THROWS_AS(build_cyclic_generator(overlap), Error);

    DaySegmentation degenerate;
    degenerate.segments = {{{0.0, 12.0}}, {{12.0, 12.0}}, {{12.0, 24.0}}};
    CHECK_THROWS_AS(build_cyclic_generator(degenerate), Error);

    DaySegmentation single;
    single.segments = {{{0.0, 24.0}}};
    CHECK_THROWS_AS(build_cyclic_generator(single), Error);
}

TEST_CASE("stationary vector of the symmetric two-state generator") {
    Eigen::MatrixXd W(2, 2);
    W << -1, 1, 1, -1;
    Eigen::VectorXd theta = stationary_vector(W);
    CHECK(theta[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(theta[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("stationary vector matches the dense oracle on random generators") {
    std::mt19937_64 rng(7001);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd W = oracles::random_generator_matrix(rng, 4);
        Eigen::VectorXd theta = stationary_vector(W);
        Eigen::VectorXd oracle = oracles::dense_stationary(W);
        CHECK((theta - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
        CHECK((theta.transpose() * W).lpNorm<Eigen::Infinity>() <= 1e-12);
        CHECK(theta.minCoeff() > 0.0);
        CHECK(theta.sum() == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("stationary vector rejects reducible generators") {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(3, 3); // three absorbing states
    CHECK_THROWS_AS(stationary_vector(W), Error);

    Eigen::MatrixXd block(4, 4); // two disconnected 2-state loops
    block << -1, 1, 0, 0,
              1, -1, 0, 0,
              0, 0, -2, 2,
              0, 0, 2, -2;
    CHECK_THROWS_AS(stationary_vector(block), Error);
}

TEST_CASE("segment-averaged rates: constants, zero segments, and linearity") {
    auto seg = DaySegmentation::seven_part_day();

    auto [lam_const, mu_const] =
        average_rates(RateProfile::constant(12.5), RateProfile::constant(3.0), seg);
    for (int i = 0; i < seg.size(); ++i) {
        CHECK(lam_const[i] == doctest::Approx(12.5).epsilon(1e-13));
        CHECK(mu_const[i] == doctest::Approx(3.0).epsilon(1e-13));
    }

    // profile vanishing on the overnight segment -> zero first-state rate
    auto rent = RateProfile::step({{0.0, 0.0}, {6.5, 40.0}, {23.5, 0.0}});
    auto [lam, mu] = average_rates(rent, RateProfile::constant(1.0), seg);
    CHECK(lam[0] == doctest::Approx(0.0));
    CHECK(lam[1] == doctest::Approx(40.0));
    (void)mu;

    // linearity: averages of a*f + b*g equal the combination of averages
    auto f = RateProfile::linear({{0.0, 5.0}, {8.0, 30.0}, {16.0, 10.0}});
    auto g = RateProfile::step({{0.0, 2.0}, {12.0, 20.0}});
    double a = 2.5, b = 0.75;
    std::vector<std::pair<double, double>> combo_pts;
    // piecewise-linear combination sampled on the union of breakpoints
    std::vector<double> knots{0.0, 8.0, 12.0 - 1e-9, 12.0, 16.0, 23.999999};
    for (double t : knots) combo_pts.emplace_back(t, a * f.eval(t) + b * g.eval(t));
    auto [lf, mf] = average_rates(f, f, seg);
    auto [lg, mg] = average_rates(g, g, seg);
    (void)mf;
    (void)mg;
    // combination checked through the exact integral API instead of a
    // resampled profile (the step/linear mix is not representable as either)
    for (int i = 0; i < seg.size(); ++i) {
        double combined = 0.0;
        for (const auto& iv : seg.segments[i])
            combined += a * f.integrate(iv.begin, iv.end) + b * g.integrate(iv.begin, iv.end);
        combined /= seg.duration(i);
        CHECK(combined == doctest::Approx(a * lf[i] + b * lg[i]).epsilon(1e-12));
    }
}

TEST_CASE("piecewise-linear averages match composite trapezoid quadrature") {
    auto seg = DaySegmentation::seven_part_day();
    auto rent = RateProfile::linear(
        {{0.0, 1.0}, {6.5, 8.0}, {8.5, 42.0}, {11.5, 12.0}, {14.0, 35.0}, {19.5, 20.0}, {23.5, 2.0}});
    auto ret = RateProfile::linear({{0.0, 3.0}, {9.0, 25.0}, {18.0, 6.0}});
    auto [lam, mu] = average_rates(rent, ret, seg);
    for (int i = 0; i < seg.size(); ++i) {
        double lam_q = 0.0, mu_q = 0.0;
        for (const auto& iv : seg.segments[i]) {
            lam_q += oracles::trapezoid_profile(rent, iv.begin, iv.end);
            mu_q += oracles::trapezoid_profile(ret, iv.begin, iv.end);
        }
        CHECK(lam[i] == doctest::Approx(lam_q / seg.duration(i)).epsilon(1e-10));
        CHECK(mu[i] == doctest::Approx(mu_q / seg.duration(i)).epsilon(1e-10));
    }
}

TEST_CASE("constructed generators have exact zero row sums and nonnegative off-diagonals") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> m_d(2, 9);
        int m = m_d(rng);
        DaySegmentation seg;
        std::uniform_real_distribution<double> dur(0.5, 3.0);
        std::vector<double> lens(m);
        double total = 0.0;
        for (auto& d : lens) {
            d = dur(rng);
            total += d;
        }
        double t0 = 0.0;
        for (int i = 0; i < m; ++i) {
            double t1 = t0 + lens[i] / total * 24.0;
            if (i == m - 1) t1 = 24.0;
            seg.segments.push_back({{t0, t1}});
            t0 = t1;
        }
        auto env = build_cyclic_generator(seg);
        for (int i = 0; i < m; ++i) {
            CHECK(std::abs(env.W.row(i).sum()) <= 1e-12);
            for (int j = 0; j < m; ++j)
                if (i != j) CHECK(env.W(i, j) >= 0.0);
        }
        // theta recovers duration ratios
        for (int i = 0; i < m; ++i)
            CHECK(env.theta[i] == doctest::Approx(seg.duration(i) / 24.0).epsilon(1e-10));
    }
}

TEST_CASE("time-scale multiplier scales the generator uniformly") {
    auto seg = DaySegmentation::seven_part_day();
    auto base = build_cyclic_generator(seg);
    auto scaled = build_cyclic_generator(seg, 3.0);
    CHECK((scaled.W - 3.0 * base.W).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((scaled.theta - base.theta).lpNorm<Eigen::Infinity>() <= 1e-12);
}
