// Command-line front end: environment construction, fixed points, mean-field
// ODE integration, finite-N simulation, parameter sweeps, and cross-method
// comparison, all driven by a JSON configuration document.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "bsmf/io.hpp"
#include "bsmf/plot.hpp"

namespace fs = std::filesystem;
using namespace bsmf;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string mode;
    std::optional<std::uint64_t> seed;
    int threads = -1;
    std::string plots;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "configuration document (JSON)")
        ->required();
    cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
    cmd->add_option("--mode", flags.mode, "assembly mode: standard | paper-literal");
    cmd->add_option("--seed", flags.seed, "simulation seed (overrides config)");
    cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
    cmd->add_option("--plots", flags.plots, "plot emission: on | off");
}

ExperimentConfig resolve(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.mode.empty()) cfg.mode = assembly_mode_from_string(flags.mode);
    if (flags.seed) cfg.sim.seed = *flags.seed;
    if (flags.threads >= 0) cfg.threads = flags.threads;
    if (!flags.plots.empty()) {
        if (flags.plots == "on")
            cfg.plots = true;
        else if (flags.plots == "off")
            cfg.plots = false;
        else
            throw Error(ErrorCode::InvalidArgument, "--plots must be 'on' or 'off'");
    }
    fs::create_directories(cfg.out_dir);
    return cfg;
}

void apply_param(ModelParams& p, const std::string& name, double value) {
    auto as_int = [&](double v) {
        int iv = static_cast<int>(std::llround(v));
        if (std::abs(v - iv) > 1e-9)
            throw Error(ErrorCode::InvalidArgument, name + " must be an integer");
        return iv;
    };
    if (name == "alpha") {
        p.alpha = value;
    } else if (name == "beta") {
        p.beta = value;
    } else if (name == "K") {
        p.K = as_int(value);
    } else if (name == "C") {
        p.C = as_int(value);
    } else if (name == "L") {
        p.L = as_int(value);
    } else if (name.rfind("lambda", 0) == 0) {
        int j = std::stoi(name.substr(6));
        if (j < 1 || j > p.env.m)
            throw Error(ErrorCode::InvalidArgument, "environment state out of range: " + name);
        p.env.lambda[j - 1] = value;
    } else if (name.rfind("mu", 0) == 0) {
        int j = std::stoi(name.substr(2));
        if (j < 1 || j > p.env.m)
            throw Error(ErrorCode::InvalidArgument, "environment state out of range: " + name);
        p.env.mu[j - 1] = value;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown sweep parameter: " + name);
    }
}

int cmd_env_build(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve(flags);
    fs::path out = cfg.out_dir / "environment.json";
    save_environment(cfg.model.env, out);
    std::cout << "environment spec written to " << out.string() << "\n";
    std::cout << "m = " << cfg.model.env.m << ", theta =";
    for (int j = 0; j < cfg.model.env.m; ++j) std::cout << " " << cfg.model.env.theta[j];
    std::cout << "\n";
    return 0;
}

int cmd_fixed_point(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve(flags);
    FixedPoint fp = solve_fixed_point(cfg.model, cfg.mode, cfg.solver);
    std::string header = metadata_header(cfg.echo);
    write_fixed_point_csv(cfg.out_dir / "fixed_point.csv", fp, cfg.model, header);
    write_fixed_point_json(cfg.out_dir / "fixed_point.json", fp, cfg.model);
    // the assembled generator at the fixed point, for external inspection
    write_matrix_csv(cfg.out_dir / "generator.csv",
                     assemble(fp.pi, cfg.model, std::nullopt, cfg.mode).dense(), header);

    PerformanceReport rep = performance(fp.pi, cfg.model);
    std::vector<std::vector<std::string>> rows{{
        format_double(rep.mean_bikes), format_double(rep.mean_wait_rent),
        format_double(rep.mean_wait_return), format_double(rep.mean_wait_max),
        format_double(rep.prob_strong), format_double(rep.prob_weak),
        format_double(fp.residual), std::to_string(fp.iterations),
        std::to_string(fp.converged ? 1 : 0)}};
    write_csv(cfg.out_dir / "report.csv", header,
              {"EQ", "EN1", "EN2", "EN", "ps", "pw", "residual", "iterations", "converged"},
              rows);

    std::cout << "residual " << fp.residual << " after " << fp.iterations << " iterations ("
              << (fp.converged ? "converged" : "NOT CONVERGED") << ")\n";
    if (!fp.converged) {
        std::cerr << "fixed-point iteration did not converge; best residual " << fp.residual
                  << "\n";
        return 1;
    }
    return 0;
}

int cmd_integrate(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve(flags);
    MeanFieldVector g = (cfg.solver.init == FixedPointOptions::Init::Uniform)
                            ? MeanFieldVector::uniform(cfg.model)
                            : MeanFieldVector::point_mass(cfg.model, cfg.model.C);
    Trajectory traj = integrate(g, cfg.model, cfg.ode_n, cfg.mode, cfg.ode_t_end,
                                cfg.ode_ctrl, cfg.ode_outputs);
    std::string header = metadata_header(cfg.echo);
    write_trajectory_csv(cfg.out_dir / "trajectory.csv", traj, cfg.model, header);
    std::cout << "integrated to t = " << cfg.ode_t_end << " h; max mass defect "
              << traj.max_mass_defect << "; " << traj.steps_accepted << " steps\n";
    return 0;
}

int cmd_simulate(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve(flags);
    SimResult sim = run(cfg.model, cfg.sim);
    std::string header = metadata_header(cfg.echo);
    write_sim_csv(cfg.out_dir / "simulation.csv", sim, cfg.model, header);
    std::cout << "simulated " << sim.events << " events over " << sim.elapsed << " h (mode "
              << to_string(sim.mode) << ", N = " << sim.N << ")\n";
    return 0;
}

std::string axis_label(const std::vector<SweepAxis>& axes, const std::vector<int>& index,
                       std::size_t upto) {
    std::string label;
    for (std::size_t a = 0; a < upto; ++a) {
        if (!label.empty()) label += ", ";
        label += axes[a].param + "=" + format_double(axes[a].values[index[a]]);
    }
    return label;
}

int cmd_sweep(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve(flags);
    if (cfg.axes.empty())
        throw Error(ErrorCode::InvalidArgument, "sweep requires at least one axis");

    std::size_t total = 1;
    for (const auto& a : cfg.axes) total *= a.values.size();

    struct Row {
        std::vector<double> params;
        PerformanceReport rep;
        double upsilon = std::numeric_limits<double>::quiet_NaN();
        double residual = 0.0;
        int iterations = 0;
        bool converged = false;
        std::string error;
    };
    std::vector<Row> rows(total);

    auto point_params = [&](std::size_t flat, std::vector<int>& index) {
        index.assign(cfg.axes.size(), 0);
        std::size_t rest = flat;
        for (std::size_t a = cfg.axes.size(); a-- > 0;) {
            index[a] = static_cast<int>(rest % cfg.axes[a].values.size());
            rest /= cfg.axes[a].values.size();
        }
    };

    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        std::vector<int> index;
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= total) return;
            point_params(i, index);
            Row& row = rows[i];
            ModelParams p = cfg.model;
            try {
                for (std::size_t a = 0; a < cfg.axes.size(); ++a) {
                    double v = cfg.axes[a].values[index[a]];
                    apply_param(p, cfg.axes[a].param, v);
                    row.params.push_back(v);
                }
                p.validate();
                FixedPoint fp = solve_fixed_point(p, cfg.mode, cfg.solver);
                row.rep = performance(fp.pi, p);
                row.residual = fp.residual;
                row.iterations = fp.iterations;
                row.converged = fp.converged;
                if (!fp.converged) row.error = "not-converged";
                if (cfg.sweep_efficiency_ratio && p.L >= 1)
                    row.upsilon = efficiency_ratio(p, cfg.mode, cfg.solver);
            } catch (const std::exception& e) {
                row.error = e.what();
                while (row.params.size() < cfg.axes.size()) row.params.push_back(0.0);
            }
        }
    };
    int n_threads = cfg.threads > 0
                        ? cfg.threads
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min<std::size_t>(n_threads, total);
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::vector<std::string> cols;
    for (const auto& a : cfg.axes) cols.push_back(a.param);
    for (const char* c : {"EQ", "EN1", "EN2", "EN", "ps", "pw"}) cols.push_back(c);
    if (cfg.sweep_efficiency_ratio) cols.push_back("upsilon");
    for (const char* c : {"residual", "iterations", "converged", "error"}) cols.push_back(c);

    std::vector<std::vector<std::string>> out_rows;
    bool all_ok = true;
    for (const auto& row : rows) {
        std::vector<std::string> r;
        for (double v : row.params) r.push_back(format_double(v));
        r.push_back(format_double(row.rep.mean_bikes));
        r.push_back(format_double(row.rep.mean_wait_rent));
        r.push_back(format_double(row.rep.mean_wait_return));
        r.push_back(format_double(row.rep.mean_wait_max));
        r.push_back(format_double(row.rep.prob_strong));
        r.push_back(format_double(row.rep.prob_weak));
        if (cfg.sweep_efficiency_ratio) r.push_back(format_double(row.upsilon));
        r.push_back(format_double(row.residual));
        r.push_back(std::to_string(row.iterations));
        r.push_back(std::to_string(row.converged ? 1 : 0));
        r.push_back(row.error);
        if (!row.error.empty()) all_ok = false;
        out_rows.push_back(std::move(r));
    }
    write_csv(cfg.out_dir / "sweep.csv", metadata_header(cfg.echo), cols, out_rows);

    if (cfg.plots && cfg.axes.size() >= 1) {
        // last axis on x; one curve per combination of the leading axes
        const auto& xaxis = cfg.axes.back();
        std::size_t curves = total / xaxis.values.size();
        auto emit = [&](const std::string& name, auto getter) {
            std::vector<PlotSeries> series;
            std::vector<int> index;
            for (std::size_t c = 0; c < curves; ++c) {
                PlotSeries s;
                for (std::size_t ix = 0; ix < xaxis.values.size(); ++ix) {
                    std::size_t flat = c * xaxis.values.size() + ix;
                    if (!rows[flat].error.empty()) continue;
                    s.x.push_back(xaxis.values[ix]);
                    s.y.push_back(getter(rows[flat]));
                }
                point_params(c * xaxis.values.size(), index);
                s.label = cfg.axes.size() > 1 ? axis_label(cfg.axes, index, cfg.axes.size() - 1)
                                              : name;
                series.push_back(std::move(s));
            }
            write_svg_plot(cfg.out_dir / (name + ".svg"), name + " vs " + xaxis.param,
                           xaxis.param, name, series);
        };
        emit("EQ", [](const Row& r) { return r.rep.mean_bikes; });
        emit("EN", [](const Row& r) { return r.rep.mean_wait_max; });
        emit("ps", [](const Row& r) { return r.rep.prob_strong; });
        emit("pw", [](const Row& r) { return r.rep.prob_weak; });
        if (cfg.sweep_efficiency_ratio)
            emit("upsilon", [](const Row& r) { return r.upsilon; });
    }

    std::cout << "sweep complete: " << total << " points -> "
              << (cfg.out_dir / "sweep.csv").string() << "\n";
    return all_ok ? 0 : 1;
}

int cmd_compare(const CommonFlags& flags) {
    ExperimentConfig cfg = resolve(flags);
    std::string header = metadata_header(cfg.echo);

    FixedPoint fp = solve_fixed_point(cfg.model, AssemblyMode::Standard, cfg.solver);
    MeanFieldVector g = MeanFieldVector::point_mass(cfg.model, cfg.model.C);
    MeanFieldVector ode = steady_state_by_integration(cfg.model, std::nullopt,
                                                      AssemblyMode::Standard, g, cfg.steady);
    SimResult sim = run(cfg.model, cfg.sim);

    // simulated time-average as a flat vector in the same layout
    MeanFieldVector sim_avg = MeanFieldVector::zero(cfg.model);
    for (int k = cfg.model.floor_level(); k <= cfg.model.ceiling_level(); ++k)
        for (int j = 0; j < cfg.model.env.m; ++j)
            sim_avg(k, j) = sim.time_avg(cfg.model.offset(k), j);

    auto sup = [](const MeanFieldVector& a, const MeanFieldVector& b) {
        return a.linf_distance(b);
    };
    auto tv_level = [](const MeanFieldVector& a, const MeanFieldVector& b) {
        return total_variation(a.level_marginal(), b.level_marginal());
    };

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"fixed-point", "ode-limit", format_double(sup(fp.pi, ode)),
                    format_double(tv_level(fp.pi, ode))});
    rows.push_back({"fixed-point", "simulation", format_double(sup(fp.pi, sim_avg)),
                    format_double(tv_level(fp.pi, sim_avg))});
    rows.push_back({"ode-limit", "simulation", format_double(sup(ode, sim_avg)),
                    format_double(tv_level(ode, sim_avg))});

    FixedPoint fp_lit = solve_fixed_point(cfg.model, AssemblyMode::PaperLiteral, cfg.solver);
    rows.push_back({"fixed-point", "fixed-point-paper-literal",
                    format_double(sup(fp.pi, fp_lit.pi)),
                    format_double(tv_level(fp.pi, fp_lit.pi))});

    write_csv(cfg.out_dir / "compare.csv", header, {"a", "b", "sup_distance", "tv_level"},
              rows);

    // the three stationary estimates side by side
    std::vector<std::vector<std::string>> est;
    for (int k = cfg.model.floor_level(); k <= cfg.model.ceiling_level(); ++k)
        for (int j = 0; j < cfg.model.env.m; ++j)
            est.push_back({std::to_string(k), std::to_string(j + 1),
                           format_double(fp.pi(k, j)), format_double(ode(k, j)),
                           format_double(sim_avg(k, j))});
    write_csv(cfg.out_dir / "estimates.csv", header,
              {"level", "env_state", "fixed_point", "ode_limit", "simulation"}, est);

    if (!cfg.compare_n_list.empty()) {
        std::vector<std::uint64_t> seeds{cfg.sim.seed};
        auto rows_n = convergence_sweep(cfg.model, cfg.compare_n_list, cfg.sim.horizon, seeds,
                                        cfg.sim.mode, fp.pi.level_marginal(), cfg.threads);
        std::vector<std::vector<std::string>> conv;
        for (const auto& r : rows_n)
            conv.push_back({std::to_string(r.N), std::to_string(r.seed), format_double(r.tv)});
        write_csv(cfg.out_dir / "convergence.csv", header, {"N", "seed", "tv_to_fixed_point"},
                  conv);
    }

    std::cout << "compare written to " << (cfg.out_dir / "compare.csv").string() << "\n";
    bool ok = fp.converged && fp_lit.converged;
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-field matrix-analytic toolkit for Markov-modulated "
                 "bike-sharing station models"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* env_build = app.add_subcommand("env-build", "construct an environment spec file");
    add_common(env_build, flags);
    auto* fixed_point = app.add_subcommand("fixed-point", "solve the stationary fixed point");
    add_common(fixed_point, flags);
    auto* integrate_cmd = app.add_subcommand("integrate", "integrate the mean-field equations");
    add_common(integrate_cmd, flags);
    auto* simulate = app.add_subcommand("simulate", "run the finite-N stochastic simulation");
    add_common(simulate, flags);
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    add_common(sweep, flags);
    auto* compare = app.add_subcommand("compare", "fixed point vs ODE limit vs simulation");
    add_common(compare, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (env_build->parsed()) return cmd_env_build(flags);
        if (fixed_point->parsed()) return cmd_fixed_point(flags);
        if (integrate_cmd->parsed()) return cmd_integrate(flags);
        if (simulate->parsed()) return cmd_simulate(flags);
        if (sweep->parsed()) return cmd_sweep(flags);
        if (compare->parsed()) return cmd_compare(flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
