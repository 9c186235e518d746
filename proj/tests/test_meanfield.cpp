#include <doctest.h>

#include "bsmf/meanfield.hpp"
#include "bsmf/qbd.hpp"
#include "oracles.hpp"

using namespace bsmf;

TEST_CASE("zero rates freeze the state") {
    ModelParams p;
    p.K = 5;
    p.C = 2;
    p.L = 1;
    p.alpha = 0.3;
    p.beta = 0.6;
    p.env = EnvironmentSpec::two_state(1.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    p.env.W.setZero();
    p.env.theta = Eigen::VectorXd::Constant(2, 0.5); // W = 0 has no unique theta; fix it

    std::mt19937_64 rng(1);
    auto g = oracles::random_probability_vector(rng, p);
    // interaction scalar is finite but mu = 0 kills all rates
    Trajectory traj = integrate(g, p, std::nullopt, AssemblyMode::Standard, 5.0, {}, 11);
    for (const auto& y : traj.states)
        CHECK(y.linf_distance(g) <= 1e-12);
}

TEST_CASE("mass is conserved along the trajectory") {
    ModelParams p = oracles::two_state_reference();
    auto g = MeanFieldVector::point_mass(p, p.C);
    Trajectory traj = integrate(g, p, std::nullopt, AssemblyMode::Standard, 50.0, {}, 101);
    CHECK(traj.max_mass_defect <= 1e-9);
    for (const auto& y : traj.states) {
        CHECK(std::abs(y.sum() - 1.0) <= 1e-9);
        CHECK(y.min() >= 0.0);
    }
}

TEST_CASE("no environment switching keeps unreached states empty") {
    ModelParams p = oracles::two_state_reference();
    p.env.W.setZero();
    p.env.theta = Eigen::VectorXd::Constant(2, 0.5);

    Eigen::VectorXd w(2);
    w << 1.0, 0.0; // start entirely in state 1
    auto g = MeanFieldVector::point_mass(p, p.C, w);
    Trajectory traj = integrate(g, p, std::nullopt, AssemblyMode::Standard, 20.0, {}, 41);
    double leaked = 0.0;
    for (const auto& y : traj.states)
        for (int k = p.floor_level(); k <= p.ceiling_level(); ++k)
            leaked = std::max(leaked, y(k, 1));
    CHECK(leaked == 0.0);
}

TEST_CASE("integrating from the fixed point stays at the fixed point") {
    ModelParams p = oracles::two_state_reference();
    FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
    REQUIRE(fp.converged);
    Trajectory traj = integrate(fp.pi, p, std::nullopt, AssemblyMode::Standard, 25.0, {}, 26);
    for (const auto& y : traj.states)
        CHECK(y.linf_distance(fp.pi) <= 1e-8);
}

TEST_CASE("long-horizon integration reaches the fixed point") {
    ModelParams p = oracles::two_state_reference();
    FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
    REQUIRE(fp.converged);

    auto g = MeanFieldVector::point_mass(p, p.C);
    SteadyStateOptions opts;
    opts.tol = 1e-10;
    MeanFieldVector steady =
        steady_state_by_integration(p, std::nullopt, AssemblyMode::Standard, g, opts);
    CHECK(derivative_norm(steady, p, std::nullopt, AssemblyMode::Standard) < 1e-10);
    CHECK(steady.linf_distance(fp.pi) <= 1e-6);
}

TEST_CASE("steady-state search reports non-convergence within a tiny budget") {
    ModelParams p = oracles::two_state_reference();
    auto g = MeanFieldVector::point_mass(p, p.C);
    SteadyStateOptions opts;
    opts.tol = 1e-14;
    opts.t_max = 0.5;
    try {
        steady_state_by_integration(p, std::nullopt, AssemblyMode::Standard, g, opts);
        FAIL("expected a no-convergence error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoConvergence);
        CHECK(e.detail() > 0.0); // carries the final derivative norm
    }
}

TEST_CASE("finite-N trajectories approach the limiting trajectory") {
    ModelParams p = oracles::two_state_reference();
    auto g = MeanFieldVector::point_mass(p, p.C);
    const double t_end = 10.0;
    Trajectory limit = integrate(g, p, std::nullopt, AssemblyMode::Standard, t_end, {}, 21);

    double prev_err = std::numeric_limits<double>::infinity();
    for (std::int64_t n : {10, 100, 1000}) {
        Trajectory fin = integrate(g, p, n, AssemblyMode::Standard, t_end, {}, 21);
        double err = 0.0;
        for (std::size_t i = 0; i < fin.states.size(); ++i)
            err = std::max(err, fin.states[i].linf_distance(limit.states[i]));
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err <= 0.02);
}

TEST_CASE("no rentals: mass climbs until the interaction feedback stops it") {
    ModelParams p = oracles::two_state_reference();
    p.env.lambda.setZero();

    auto g = MeanFieldVector::point_mass(p, p.C);
    SteadyStateOptions opts;
    opts.tol = 1e-10;
    MeanFieldVector steady =
        steady_state_by_integration(p, std::nullopt, AssemblyMode::Standard, g, opts);

    // upward drift pushed mass above the initial level
    double mean_level = 0.0;
    for (int k = p.floor_level(); k <= p.ceiling_level(); ++k)
        for (int j = 0; j < p.env.m; ++j) mean_level += k * steady(k, j);
    CHECK(mean_level > p.C + 1.0);
    // nothing below the initial level: no service transitions exist
    for (int k = p.floor_level(); k < p.C; ++k)
        for (int j = 0; j < p.env.m; ++j) CHECK(steady(k, j) <= 1e-12);
}
