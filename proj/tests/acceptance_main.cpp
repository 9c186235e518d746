// Acceptance suite: runs every gating criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit code 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "bsmf/io.hpp"
#include "bsmf/meanfield.hpp"
#include "bsmf/measures.hpp"
#include "bsmf/qbd.hpp"
#include "bsmf/sim.hpp"
#include "oracles.hpp"

using namespace bsmf;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<std::string()> body; // returns detail text; throws on failure

    bool run() const {
        auto start = std::chrono::steady_clock::now();
        try {
            std::string detail = body();
            double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
            std::printf("[PASS] %2d %-38s %s (%.1fs)\n", id, name.c_str(), detail.c_str(),
                        secs);
            return true;
        } catch (const std::exception& e) {
            double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
            std::printf("[FAIL] %2d %-38s %s (%.1fs)\n", id, name.c_str(), e.what(), secs);
            return false;
        }
    }
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// ---- criterion bodies ----------------------------------------------------

std::string generator_validity() {
    std::mt19937_64 rng(1001);
    double worst_std = 0.0, worst_lit = 0.0, min_off = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        ModelParams p = oracles::random_model(rng);
        auto y = oracles::random_probability_vector(rng, p);
        auto std_v = assemble(y, p, std::nullopt, AssemblyMode::Standard);
        auto lit_v = assemble(y, p, std::nullopt, AssemblyMode::PaperLiteral);
        worst_std = std::max(worst_std, row_sum_residual(std_v));
        worst_lit = std::max(worst_lit, row_sum_residual(lit_v));
        min_off = std::min(min_off, min_off_diagonal(std_v));
    }
    require(worst_std <= 1e-12, "standard row-sum residual " + fmt(worst_std));
    require(worst_lit <= 1e-12, "literal row-sum residual " + fmt(worst_lit));
    require(min_off >= 0.0, "negative off-diagonal " + fmt(min_off));
    return "row-sum residuals " + fmt(worst_std) + " / " + fmt(worst_lit);
}

std::string qbd_oracle_equivalence() {
    std::mt19937_64 rng(2002);
    double worst = 0.0;
    int accepted = 0, rejected = 0;
    while (accepted < 25) {
        int m = 1 + static_cast<int>(rng() % 5);
        int max_levels = std::max(3, 200 / m);
        int levels = 3 + static_cast<int>(rng() % (max_levels - 2));
        int floor = -static_cast<int>(rng() % 4);
        Eigen::MatrixXd W =
            m == 1 ? Eigen::MatrixXd::Zero(1, 1) : oracles::random_generator_matrix(rng, m);
        RateTable t = oracles::random_rate_table(rng, floor, floor + levels - 1, m);
        auto V = assemble_from_rates(t, W, AssemblyMode::Standard);
        // A nearly two-dimensional null space (deep two-basin chain) makes
        // the dense reference itself untrustworthy; such draws are redrawn.
        if (oracles::null_space_separation(V.dense()) < 1e-5) {
            ++rejected;
            require(rejected < 200, "instance rejection ran away");
            continue;
        }
        ++accepted;
        MeanFieldVector pi = linear_qbd_solve(V);
        Eigen::VectorXd oracle = oracles::dense_stationary(V.dense());
        worst = std::max(worst, (pi.data() - oracle).lpNorm<Eigen::Infinity>());
    }
    require(worst <= 1e-10, "sup deviation " + fmt(worst));
    return "max sup deviation " + fmt(worst) + " (" + std::to_string(rejected) +
           " ill-conditioned draws rejected)";
}

std::string birth_death_reduction() {
    std::mt19937_64 rng(3003);
    double worst = 0.0;
    for (int trial = 0; trial < 15; ++trial) {
        int floor = -static_cast<int>(rng() % 3);
        int levels = 5 + static_cast<int>(rng() % 8);
        RateTable t = oracles::random_rate_table(rng, floor, floor + levels - 1, 1);
        auto V = assemble_from_rates(t, Eigen::MatrixXd::Zero(1, 1), AssemblyMode::Standard);
        MeanFieldVector pi = linear_qbd_solve(V);
        std::vector<double> birth, death;
        for (int o = 0; o + 1 < levels; ++o) {
            birth.push_back(t.xi(o, 0));
            death.push_back(t.eta(o + 1, 0));
        }
        Eigen::VectorXd oracle = oracles::birth_death_stationary(birth, death);
        worst = std::max(worst, (pi.data() - oracle).lpNorm<Eigen::Infinity>());
    }
    require(worst <= 1e-12, "sup deviation " + fmt(worst));
    return "max sup deviation " + fmt(worst);
}

std::string fixed_point_residual_ref() {
    ModelParams p = oracles::two_state_reference();
    FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
    require(fp.converged, "did not converge");
    require(fp.iterations <= 500, "iterations " + std::to_string(fp.iterations));
    require(fp.residual <= 1e-10, "residual " + fmt(fp.residual));
    return "residual " + fmt(fp.residual) + " in " + std::to_string(fp.iterations) +
           " iterations";
}

std::vector<ModelParams> interchange_sets() {
    std::vector<ModelParams> sets{oracles::two_state_reference()};
    std::mt19937_64 rng(5005);
    for (int i = 0; i < 10; ++i) sets.push_back(oracles::random_stable_model(rng));
    return sets;
}

std::string interchange_of_limits() {
    double worst = 0.0;
    for (const auto& p : interchange_sets()) {
        FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
        require(fp.converged, "fixed point did not converge");
        auto g = MeanFieldVector::point_mass(p, p.C);
        SteadyStateOptions opts;
        opts.tol = 1e-11;
        MeanFieldVector steady =
            steady_state_by_integration(p, std::nullopt, AssemblyMode::Standard, g, opts);
        worst = std::max(worst, steady.linf_distance(fp.pi));
    }
    require(worst <= 1e-6, "sup deviation " + fmt(worst));
    return "max sup deviation " + fmt(worst);
}

std::string ode_conservation() {
    double worst = 0.0;
    for (const auto& p : interchange_sets()) {
        auto g = MeanFieldVector::point_mass(p, p.C);
        Trajectory traj = integrate(g, p, std::nullopt, AssemblyMode::Standard, 100.0, {}, 101);
        worst = std::max(worst, traj.max_mass_defect);
        for (const auto& y : traj.states)
            worst = std::max(worst, std::abs(y.sum() - 1.0));
    }
    require(worst <= 1e-9, "mass defect " + fmt(worst));
    return "max mass defect " + fmt(worst);
}

std::string simulator_conservation() {
    ModelParams p = oracles::two_state_reference();
    SimOptions opts;
    opts.N = 500;
    opts.horizon = 1e9;
    opts.max_events = 1000000;
    opts.seed = 777;
    opts.mode = SimMode::Physical;
    SimResult res = run(p, opts); // conservation asserted after every event
    require(res.events == 1000000, "event count " + std::to_string(res.events));
    return "1e6 events, conservation checked each event";
}

std::string meanfield_convergence() {
    ModelParams p = oracles::two_state_reference();
    FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
    require(fp.converged, "fixed point did not converge");

    const std::vector<std::int64_t> n_list{10, 100, 1000};
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < 5; ++s) seeds.push_back(child_seed(4242, s));
    auto rows = convergence_sweep(p, n_list, 250.0, seeds, SimMode::PaperRates,
                                  fp.pi.level_marginal(), 0);

    std::vector<double> mean(n_list.size(), 0.0), se(n_list.size(), 0.0);
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        std::vector<double> tvs;
        for (const auto& r : rows)
            if (r.N == n_list[i]) tvs.push_back(r.tv);
        for (double v : tvs) mean[i] += v;
        mean[i] /= tvs.size();
        for (double v : tvs) se[i] += (v - mean[i]) * (v - mean[i]);
        se[i] = std::sqrt(se[i] / (tvs.size() - 1) / tvs.size());
    }
    std::string detail = "TV means";
    for (std::size_t i = 0; i < mean.size(); ++i)
        detail += " N=" + std::to_string(n_list[i]) + ":" + fmt(mean[i]);
    for (std::size_t i = 0; i + 1 < mean.size(); ++i)
        require(mean[i + 1] + se[i + 1] < mean[i] - se[i],
                "not statistically decreasing: " + detail);
    require(mean.back() < 0.05, "TV at N=1000 " + fmt(mean.back()));
    return detail;
}

std::string propagation_of_chaos() {
    ModelParams p = oracles::two_state_reference();
    SimOptions opts;
    opts.N = 1000;
    opts.horizon = 300.0;
    opts.seed = 616;
    opts.mode = SimMode::PaperRates;
    ChaosResult res = chaos_check(p, opts, 2, 30, 200, 0.05);
    require(res.tv < 0.05, "TV " + fmt(res.tv));
    return "TV " + fmt(res.tv) + " CI [" + fmt(res.tv_ci_lo) + ", " + fmt(res.tv_ci_hi) + "]";
}

struct TrendGrid {
    std::vector<double> lambda1{30, 32.5, 35, 37.5, 40, 42.5, 45};
    std::vector<double> mu1{25, 30, 35, 40};
    std::vector<std::vector<PerformanceReport>> reports; // [mu][lambda]
};

TrendGrid solve_trend_grid() {
    TrendGrid grid;
    grid.reports.resize(grid.mu1.size());
    ModelParams base = oracles::two_state_reference();
    for (std::size_t a = 0; a < grid.mu1.size(); ++a) {
        for (double l1 : grid.lambda1) {
            ModelParams p = base;
            p.env.lambda[0] = l1;
            p.env.mu[0] = grid.mu1[a];
            FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
            require(fp.converged, "grid point did not converge");
            grid.reports[a].push_back(performance(fp.pi, p));
        }
    }
    return grid;
}

std::string figure_trends() {
    TrendGrid grid = solve_trend_grid();
    // (a) E[Q] strictly decreasing in lambda1, increasing in mu1
    for (std::size_t a = 0; a < grid.mu1.size(); ++a)
        for (std::size_t i = 0; i + 1 < grid.lambda1.size(); ++i)
            require(grid.reports[a][i + 1].mean_bikes < grid.reports[a][i].mean_bikes,
                    "E[Q] not decreasing in lambda1");
    for (std::size_t i = 0; i < grid.lambda1.size(); ++i)
        for (std::size_t a = 0; a + 1 < grid.mu1.size(); ++a)
            require(grid.reports[a + 1][i].mean_bikes > grid.reports[a][i].mean_bikes,
                    "E[Q] not increasing in mu1");
    // (b) p_s decreasing in lambda1, increasing in mu1
    for (std::size_t a = 0; a < grid.mu1.size(); ++a)
        for (std::size_t i = 0; i + 1 < grid.lambda1.size(); ++i)
            require(grid.reports[a][i + 1].prob_strong <= grid.reports[a][i].prob_strong + 1e-12,
                    "p_s not decreasing in lambda1");
    for (std::size_t i = 0; i < grid.lambda1.size(); ++i)
        for (std::size_t a = 0; a + 1 < grid.mu1.size(); ++a)
            require(grid.reports[a + 1][i].prob_strong >= grid.reports[a][i].prob_strong - 1e-12,
                    "p_s not increasing in mu1");

    // (c)-(d): waiting-room panels; p_s and upsilon nonincreasing in L
    auto panel = [&](double lambda1, double mu_both, bool sweep_alpha, double fixed_prob) {
        const std::vector<double> probs{0.10, 0.25, 0.50, 0.75, 0.90};
        for (double q : probs) {
            double prev_ps = std::numeric_limits<double>::infinity();
            double prev_ratio = std::numeric_limits<double>::infinity();
            double ps0 = 0.0;
            for (int L = 0; L <= 9; ++L) {
                ModelParams p;
                p.K = 20;
                p.C = 5;
                p.L = L;
                p.alpha = sweep_alpha ? q : fixed_prob;
                p.beta = sweep_alpha ? fixed_prob : q;
                p.env = EnvironmentSpec::two_state(1.0, 1.0, lambda1, 50.0, mu_both, mu_both);
                FixedPoint fp = solve_fixed_point(p, AssemblyMode::Standard);
                require(fp.converged, "panel point did not converge");
                double ps = performance(fp.pi, p).prob_strong;
                require(ps <= prev_ps + 1e-12, "p_s not nonincreasing in L");
                prev_ps = ps;
                if (L == 0) {
                    ps0 = ps;
                } else {
                    double ratio = ps / ps0;
                    require(ratio <= prev_ratio + 1e-12, "upsilon not nonincreasing in L");
                    prev_ratio = ratio;
                }
            }
        }
    };
    panel(45.0, 20.0, true, 0.75);  // alpha sweep, beta fixed
    panel(55.0, 10.0, false, 0.75); // beta sweep, alpha fixed
    return "all four monotonicity families hold";
}

std::string determinism() {
    fs::path dir = fs::temp_directory_path() / "bsmf_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string config = R"({
      "model": {
        "K": 20, "C": 10, "L": 5, "alpha": 0.5, "beta": 0.5,
        "env": {"W": [[-1, 1], [1, -1]], "lambda": [35, 50], "mu": [30, 20]}
      },
      "solver": {"mode": "standard"},
      "sim": {"N": 100, "horizon": 25, "seed": 31337, "mode": "physical", "sample_dt": 5.0},
      "sweep": {"axes": [{"param": "lambda1", "values": [32, 36, 40]}]},
      "output": {"dir": ")" + (dir / "run").string() + R"("}
    })";
    std::ofstream(dir / "config.json") << config;

    auto body = [&](const fs::path& file) {
        std::ifstream in(file);
        std::ostringstream out;
        std::string line;
        while (std::getline(in, line))
            if (line.empty() || line[0] != '#') out << line << "\n";
        return out.str();
    };
    auto run_cmd = [&](const std::string& sub, const fs::path& out_dir) {
        std::string cmd = std::string(BSMF_CLI_PATH) + " " + sub + " --config " +
                          (dir / "config.json").string() + " --out " + out_dir.string() +
                          " > /dev/null 2>&1";
        require(std::system(cmd.c_str()) == 0, sub + " exited nonzero");
    };
    run_cmd("sweep", dir / "a");
    run_cmd("sweep", dir / "b");
    require(body(dir / "a" / "sweep.csv") == body(dir / "b" / "sweep.csv"),
            "sweep bodies differ");
    run_cmd("simulate", dir / "a");
    run_cmd("simulate", dir / "b");
    require(body(dir / "a" / "simulation.csv") == body(dir / "b" / "simulation.csv"),
            "simulation bodies differ");
    return "sweep and simulation bodies byte-identical";
}

std::string multistart_uniqueness() {
    std::vector<ModelParams> sets{oracles::two_state_reference()};
    std::mt19937_64 rng(1212);
    for (int i = 0; i < 10; ++i) sets.push_back(oracles::random_stable_model(rng));

    double worst = 0.0;
    for (const auto& p : sets) {
        FixedPointOptions from_c;
        from_c.init = FixedPointOptions::Init::LevelC;
        FixedPointOptions uniform;
        uniform.init = FixedPointOptions::Init::Uniform;
        FixedPoint a = solve_fixed_point(p, AssemblyMode::Standard, from_c);
        FixedPoint b = solve_fixed_point(p, AssemblyMode::Standard, uniform);
        require(a.converged && b.converged, "an initialization did not converge");
        worst = std::max(worst, a.pi.linf_distance(b.pi));
    }
    require(worst <= 1e-8, "sup disagreement " + fmt(worst));
    return "max sup disagreement " + fmt(worst);
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    std::vector<Criterion> criteria{
        {1, "generator validity", generator_validity},
        {2, "linear QBD oracle equivalence", qbd_oracle_equivalence},
        {3, "birth-death reduction", birth_death_reduction},
        {4, "fixed-point residual", fixed_point_residual_ref},
        {5, "interchange of limits", interchange_of_limits},
        {6, "ODE conservation", ode_conservation},
        {7, "simulator conservation", simulator_conservation},
        {8, "mean-field convergence", meanfield_convergence},
        {9, "propagation of chaos", propagation_of_chaos},
        {10, "figure-trend regressions", figure_trends},
        {11, "determinism", determinism},
        {12, "multi-start uniqueness", multistart_uniqueness},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        if (!c.run()) ++failures;
    }
    if (failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
